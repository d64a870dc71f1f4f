#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dthcp/hgps.hpp"
#include "dthcp/rng.hpp"
#include "dthcp/types.hpp"

namespace dthcp {

/// Probability clamp applied inside every log.
inline constexpr double kProbEpsilon = 1e-7;

enum class HeadRole { Cls, Wgt, Refine };

const char* to_string(HeadRole role);
HeadRole head_role_from_string(const std::string& s);

/// Affine map from D-dim proposal features to per-class logits.
struct LinearHead {
    HeadRole role = HeadRole::Cls;
    int stage = 0;
    Matrix weight;  // D x K
    Vector bias;    // K

    static LinearHead zeros(HeadRole role, int stage, int in_dim, int out_dim);
    /// Xavier-uniform weights, zero bias.
    static LinearHead xavier(HeadRole role, int stage, int in_dim, int out_dim, SplitMix64& rng);

    int in_dim() const { return static_cast<int>(weight.rows()); }
    int out_dim() const { return static_cast<int>(weight.cols()); }

    Matrix logits(const Matrix& features) const;
};

/// Row-wise (class-wise) softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);
/// Column-wise (proposal-wise) softmax with max subtraction.
Matrix softmax_cols(const Matrix& logits);

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs);
Matrix softmax_cols_backward(const Matrix& probs, const Matrix& grad_probs);

struct ScoreStack {
    Matrix logits_cls;
    Matrix logits_wgt;
    Matrix s;   // class-wise softmax
    Matrix w;   // proposal-wise softmax
    Matrix ws;  // s (.) w
    Vector s_img;
};

ScoreStack forward_wsbdn(const Matrix& features, const LinearHead& cls, const LinearHead& wgt);
Matrix forward_ir(const Matrix& features, const LinearHead& head);

/// (C+1)-vector: the image labels followed by a background entry fixed to 1.
Vector box_level_label(std::span<const int> image_labels);

struct LossValue {
    double value = 0.0;
    /// No proposal fell into the loss's denominator; value is 0 by convention.
    bool empty = false;
};

/// Binary cross-entropy summed over entries. Serves both the image loss and the
/// WSDDN baseline loss (which runs on C-column stacks).
double loss_img(const Vector& image_scores, const Vector& labels);
double loss_wsddn_baseline(const ScoreStack& stack, const Vector& image_labels);

/// Cross-entropy over non-ignored proposals, normalized by their count.
LossValue loss_cls(const Matrix& scores, const AssignedLabels& labels, bool weighted);

/// Pushes ignored proposals' scores on absent classes toward 0, normalized by
/// the number of ignored proposals.
LossValue loss_cls_ign(const Matrix& scores, const AssignedLabels& labels, const Vector& box_label);

/// Weighted cross-entropy normalized by the total proposal count.
double loss_oicr_baseline(const Matrix& scores, const AssignedLabels& labels);

struct StageLosses {
    double img = 0.0;
    double cls0 = 0.0;
    double ign0 = 0.0;
    std::vector<double> cls;  // per refinement stage
    std::vector<double> ign;  // per refinement stage, same length as cls

    double base() const { return img + cls0 + ign0; }
    double refine(std::size_t k) const { return cls.at(k) + ign.at(k); }
};

double loss_total_dthcp(const StageLosses& losses);

// Gradients of each loss with respect to its score input.
Vector grad_loss_img(const Vector& image_scores, const Vector& labels);
Matrix grad_loss_cls(const Matrix& scores, const AssignedLabels& labels, bool weighted);
Matrix grad_loss_cls_ign(const Matrix& scores, const AssignedLabels& labels, const Vector& box_label);
Matrix grad_loss_oicr(const Matrix& scores, const AssignedLabels& labels);

/// Base two-branch head pair plus K refinement heads.
struct DetectorModel {
    LinearHead cls;
    LinearHead wgt;
    std::vector<LinearHead> refine;
    long long step = 0;

    static DetectorModel xavier(int feature_dim, int num_columns, int stages, SplitMix64& rng);

    std::vector<const LinearHead*> heads() const;
    std::vector<LinearHead*> heads();
    int feature_dim() const { return cls.in_dim(); }
};

struct ForwardPass {
    ScoreStack base;
    std::vector<Matrix> refine;
};

ForwardPass forward(const DetectorModel& model, const Matrix& features);

/// Fixed supervision for one image: labels are treated as constants.
struct Supervision {
    Vector box_label;
    /// Index 0: base stage; index k: refinement stage k.
    std::vector<AssignedLabels> stage_labels;
    bool use_cls_ign = true;
};

enum class LossId { Image, ClsUnweighted, ClsWeighted, ClsIgnored, Wsddn, Oicr, Total };

const char* to_string(LossId id);

/// `stage` selects the refinement stage for per-stage losses (ClsWeighted,
/// ClsIgnored, Oicr); ClsIgnored with stage 0 acts on the base scores.
double evaluate_loss(LossId id, int stage, const ForwardPass& pass, const Supervision& sup);

StageLosses evaluate_stage_losses(const ForwardPass& pass, const Supervision& sup);

struct HeadGradient {
    Matrix weight;
    Vector bias;
};

struct Gradients {
    /// Same order as DetectorModel::heads().
    std::vector<HeadGradient> heads;
    /// Empty unless requested.
    Matrix features;
};

Gradients zero_gradients(const DetectorModel& model);
void accumulate(Gradients& into, const Gradients& g, double scale = 1.0);

/// Analytic gradients of a loss. `pass` must come from forward(model, features);
/// throws InvalidInput on shape mismatch.
Gradients backward(LossId id, int stage, const DetectorModel& model, const Matrix& features,
                   const ForwardPass& pass, const Supervision& sup, bool feature_grad = false);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Compares backward() against central differences of evaluate_loss() over
/// every head parameter (and every feature entry when `features_too`), with the
/// supervision held fixed. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult finite_difference_check(LossId id, int stage, const DetectorModel& model, const Matrix& features,
                                        const Supervision& sup, double h = 1e-5, bool features_too = false);

/// theta <- theta - lr * (g + weight_decay * theta). Throws InvalidInput on a
/// negative learning rate or non-finite gradient, leaving the model untouched.
void sgd_step(DetectorModel& model, const Gradients& grads, double lr, double weight_decay);

}  // namespace dthcp
