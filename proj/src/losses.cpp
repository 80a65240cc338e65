#include "losses.hpp"

#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace mvf::losses {

namespace {

void require_finite(const torch::Tensor& t, const char* name) {
  auto bad = torch::logical_not(torch::isfinite(t.detach()));
  if (!bad.any().item<bool>()) return;
  auto idx = torch::nonzero(bad)[0];
  std::ostringstream msg;
  msg << "non-finite value in " << name << " at index (";
  for (int64_t i = 0; i < idx.size(0); ++i) msg << (i ? "," : "") << idx[i].item<int64_t>();
  msg << ")";
  throw numeric_error(msg.str());
}

}  // namespace

LossWeights step_weights(const WeightSchedule& schedule, int epoch) {
  if (epoch < 0) throw invalid_argument("epoch must be non-negative");
  const auto& i = schedule.initial;
  const auto& m = schedule.multipliers;
  return {i.gamma * std::pow(m.gamma, epoch), i.alpha * std::pow(m.alpha, epoch), i.beta * std::pow(m.beta, epoch)};
}

JointTerms joint_loss_terms(const torch::Tensor& p, const torch::Tensor& y, const torch::Tensor& mask_pred,
                            const torch::Tensor& mask_true, const LossWeights& w, DiceForm dice) {
  require_finite(p, "scores");
  require_finite(y, "labels");
  require_finite(mask_pred, "predicted masks");
  require_finite(mask_true, "ground-truth masks");
  if (p.dim() != 1 || y.sizes() != p.sizes()) throw shape_error("scores and labels must be matching (N) vectors");
  if (mask_pred.dim() != 3 || mask_pred.sizes() != mask_true.sizes() || mask_pred.size(0) != p.size(0))
    throw shape_error("masks must be matching (N,H,W) tensors");

  const auto dtype = p.scalar_type();
  auto yy = y.to(dtype);
  auto m = mask_true.to(mask_pred.scalar_type());
  auto pc = p.clamp(kProbClip, 1.0 - kProbClip);
  auto mc = mask_pred.clamp(kProbClip, 1.0 - kProbClip);

  JointTerms t;
  t.detection = -(yy * torch::log(pc) + (1 - yy) * torch::log(1 - pc)).mean();
  t.pixel = -(m * torch::log(mc) + (1 - m) * torch::log(1 - mc)).mean({1, 2}).mean();
  if (dice == DiceForm::kStandard) {
    auto inter = (m * mask_pred).sum({1, 2});
    auto denom = (m * m).sum({1, 2}) + (mask_pred * mask_pred).sum({1, 2}) + kDiceEps;
    t.dice = (1 - 2 * inter / denom).mean();
  } else {
    auto ratio = 2 * m * mask_pred / (m * m + mask_pred * mask_pred + kDiceEps);
    t.dice = (1 - ratio.sum({1, 2})).mean();
  }
  t.total = w.gamma * t.detection + w.alpha * t.pixel + w.beta * t.dice;
  return t;
}

torch::Tensor joint_loss(const torch::Tensor& p, const torch::Tensor& y, const torch::Tensor& mask_pred,
                         const torch::Tensor& mask_true, const LossWeights& w, DiceForm dice) {
  return joint_loss_terms(p, y, mask_pred, mask_true, w, dice).total;
}

std::vector<double> default_scale_weights() { return {0.01, 0.0075, 0.005}; }

torch::Tensor pretrain_loss(const std::vector<torch::Tensor>& logits, const torch::Tensor& target,
                            const std::vector<int>& scales, const std::vector<double>& scale_weights) {
  if (logits.size() != scales.size() || scales.size() != scale_weights.size())
    throw invalid_argument("pretrain loss: logits, scales and weights must have equal length");
  if (logits.empty()) throw invalid_argument("pretrain loss: no scales");
  const auto classes = logits.front().size(1);
  if (target.dim() != 1) throw shape_error("pretrain loss: target must be (B)");
  if ((target < 0).any().item<bool>() || (target >= classes).any().item<bool>())
    throw invalid_argument("pretrain loss: class index out of range [0," + std::to_string(classes) + ")");
  torch::Tensor total;
  for (std::size_t s = 0; s < logits.size(); ++s) {
    const auto& th = logits[s];
    const int64_t side = int64_t{1} << scales[s];
    if (th.dim() != 4 || th.size(1) != classes || th.size(2) != side || th.size(3) != side ||
        th.size(0) != target.size(0))
      throw shape_error("pretrain loss: logits for scale " + std::to_string(scales[s]) + " must be (B,C," +
                        std::to_string(side) + "," + std::to_string(side) + ")");
    require_finite(th, "pretrain logits");
    auto logp = torch::log_softmax(th, 1);
    auto idx = target.to(torch::kLong).view({-1, 1, 1, 1}).expand({th.size(0), 1, side, side});
    auto ce_sum = -logp.gather(1, idx).sum({1, 2, 3});  // per frame
    auto term = scale_weights[s] / static_cast<double>(side * side) * ce_sum.mean();
    total = total.defined() ? total + term : term;
  }
  return total;
}

std::vector<double> cell_accuracy(const std::vector<torch::Tensor>& logits, const torch::Tensor& target) {
  std::vector<double> out;
  for (const auto& th : logits) {
    auto pred = th.argmax(1);
    auto t = target.to(torch::kLong).view({-1, 1, 1}).expand_as(pred);
    out.push_back((pred == t).to(torch::kFloat64).mean().item<double>());
  }
  return out;
}

DiceForm dice_form_from_string(const std::string& s) {
  if (s == "standard") return DiceForm::kStandard;
  if (s == "per_pixel") return DiceForm::kPerPixel;
  throw config_error("unknown dice form: " + s + " (expected standard|per_pixel)");
}

}  // namespace mvf::losses
