#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace mvf::plot {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string xml_unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out += s[i];
      continue;
    }
    const auto end = s.find(';', i);
    if (end == std::string::npos) throw io_error("malformed entity in SVG metadata");
    const auto name = s.substr(i + 1, end - i - 1);
    if (name == "amp") out += '&';
    else if (name == "lt") out += '<';
    else if (name == "gt") out += '>';
    else if (name == "quot") out += '"';
    else throw io_error("unknown entity &" + name + "; in SVG metadata");
    i = end;
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

std::string render_svg(const LinePlot& plot, const nlohmann::json& table) {
  double lo = plot.y_min, hi = plot.y_max;
  if (plot.auto_range) {
    lo = INFINITY;
    hi = -INFINITY;
    for (const auto& s : plot.series)
      for (double v : s.values)
        if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) hi = lo + 1;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  const std::size_t n = plot.x_ticks.size();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto x_at = [&](std::size_t i) { return kLeft + (n <= 1 ? pw / 2 : pw * static_cast<double>(i) / static_cast<double>(n - 1)); };
  auto y_at = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  o << "<metadata id=\"mvf-table\">" << xml_escape(table.dump()) << "</metadata>\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kWidth / 2 - kRight / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
    << xml_escape(plot.title) << "</text>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << y_at(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(v) << "</text>\n";
    o << "<line x1=\"" << kLeft << "\" y1=\"" << y_at(v) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << y_at(v)
      << "\" stroke=\"#ddd\"/>\n";
  }
  const std::size_t stride = std::max<std::size_t>(1, n / 12);
  for (std::size_t i = 0; i < n; i += stride) {
    o << "<text x=\"" << x_at(i) << "\" y=\"" << kTop + ph + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(plot.x_ticks[i])
      << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 16
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(plot.x_label) << "</text>\n";
  o << "<text x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
    << "transform=\"rotate(-90 18 " << kTop + ph / 2 << ")\">" << xml_escape(plot.y_label) << "</text>\n";
  for (std::size_t s = 0; s < plot.series.size(); ++s) {
    const auto& series = plot.series[s];
    const char* color = kColors[s % std::size(kColors)];
    std::ostringstream pts;
    for (std::size_t i = 0; i < series.values.size() && i < n; ++i) {
      if (!std::isfinite(series.values[i])) continue;
      pts << x_at(i) << ',' << y_at(series.values[i]) << ' ';
      o << "<circle cx=\"" << x_at(i) << "\" cy=\"" << y_at(series.values[i]) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts.str() << "\"/>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(s);
    o << "<line x1=\"" << kLeft + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 35 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kLeft + pw + 40 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << xml_escape(series.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_svg(const std::string& path, const LinePlot& plot, const nlohmann::json& table) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write plot: " + path);
  out << render_svg(plot, table);
}

nlohmann::json read_svg_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw not_found("plot not found: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto text = buf.str();
  const std::string open = "<metadata id=\"mvf-table\">";
  const auto a = text.find(open);
  const auto b = text.find("</metadata>", a);
  if (a == std::string::npos || b == std::string::npos) throw io_error("no embedded table in " + path);
  return nlohmann::json::parse(xml_unescape(text.substr(a + open.size(), b - a - open.size())));
}

LinePlot sweep_plot(const nlohmann::json& table) {
  LinePlot p;
  p.title = "Detection and localization vs. compression";
  p.x_label = "quality";
  p.y_label = "metric";
  Series map{"mAP", {}}, f1{"pixel F1", {}};
  for (const auto& row : table) {
    p.x_ticks.push_back(row.at("quality").get<std::string>() + " (" + std::to_string(row.at("quality_factor").get<int>()) + ")");
    map.values.push_back(row.at("map").is_null() ? NAN : row.at("map").get<double>());
    f1.values.push_back(row.at("f1").is_null() ? NAN : row.at("f1").get<double>());
  }
  p.series = {map, f1};
  return p;
}

LinePlot curves_plot(const std::string& csv_path, nlohmann::json& table_out) {
  std::ifstream in(csv_path);
  if (!in) throw not_found("training curves not found: " + csv_path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw io_error("training curves lack column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_stage = col("stage"), c_epoch = col("epoch"), c_loss = col("loss"), c_acc = col("val_accuracy");
  LinePlot p;
  p.title = "Training curves";
  p.x_label = "epoch";
  p.y_label = "value";
  p.auto_range = true;
  Series loss{"loss", {}}, acc{"val accuracy", {}};
  table_out = nlohmann::json::array();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < header.size()) cells.emplace_back();
    const auto stage = cells[c_stage];
    p.x_ticks.push_back(stage == "full" ? cells[c_epoch] : stage.substr(0, 1) + cells[c_epoch]);
    loss.values.push_back(std::stod(cells[c_loss]));
    acc.values.push_back(stage == "pretrain" ? NAN : std::stod(cells[c_acc]));
    table_out.push_back({{"stage", stage}, {"epoch", std::stoi(cells[c_epoch])}, {"loss", loss.values.back()},
                         {"val_accuracy", stage == "pretrain" ? nlohmann::json(nullptr) : nlohmann::json(acc.values.back())}});
  }
  p.series = {loss, acc};
  return p;
}

}  // namespace mvf::plot
