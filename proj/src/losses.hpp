// Training objectives: the joint detection/localization loss and the
// multi-scale camera-model pretraining loss.
#pragma once

#include <vector>

#include <torch/torch.h>

namespace mvf::losses {

inline constexpr double kProbClip = 1e-7;
inline constexpr double kDiceEps = 1e-7;

struct LossWeights {
  double gamma = 1.0;  // detection BCE
  double alpha = 1.0;  // pixel BCE
  double beta = 1.0;   // Dice
};

struct WeightSchedule {
  LossWeights initial{};
  LossWeights multipliers{0.95, 0.80, 1.18};
};

/// initial * multiplier^epoch, per component.
LossWeights step_weights(const WeightSchedule& schedule, int epoch);

enum class DiceForm {
  kStandard,  // 1 - 2 sum(m*mh) / (sum m^2 + sum mh^2 + eps)
  kPerPixel,  // 1 - sum_ij 2 m mh / (m^2 + mh^2 + eps)
};

struct JointTerms {
  torch::Tensor detection;
  torch::Tensor pixel;
  torch::Tensor dice;
  torch::Tensor total;
};

/// p, y: (N); mask_pred, mask_true: (N,H,W). Per-frame terms are averaged
/// over the batch. Throws on non-finite input, naming the offending index.
JointTerms joint_loss_terms(const torch::Tensor& p, const torch::Tensor& y, const torch::Tensor& mask_pred,
                            const torch::Tensor& mask_true, const LossWeights& w,
                            DiceForm dice = DiceForm::kStandard);
torch::Tensor joint_loss(const torch::Tensor& p, const torch::Tensor& y, const torch::Tensor& mask_pred,
                         const torch::Tensor& mask_true, const LossWeights& w, DiceForm dice = DiceForm::kStandard);

/// Default per-scale weights lambda_k for k = 3, 4, 5.
std::vector<double> default_scale_weights();

/// sum_k lambda_k / 4^k * sum_ij CE(softmax(theta^k_ij), c*), averaged over
/// the batch. `logits[s]` is (B,C,2^k,2^k) for scales[s]; `target` is (B).
torch::Tensor pretrain_loss(const std::vector<torch::Tensor>& logits, const torch::Tensor& target,
                            const std::vector<int>& scales, const std::vector<double>& scale_weights);

/// Fraction of grid cells whose argmax equals the target, per scale.
std::vector<double> cell_accuracy(const std::vector<torch::Tensor>& logits, const torch::Tensor& target);

DiceForm dice_form_from_string(const std::string& s);

}  // namespace mvf::losses
