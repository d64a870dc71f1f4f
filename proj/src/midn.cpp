#include "dthcp/midn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dthcp/error.hpp"

namespace dthcp {

const char* to_string(HeadRole role) {
    switch (role) {
        case HeadRole::Cls: return "cls";
        case HeadRole::Wgt: return "wgt";
        case HeadRole::Refine: return "refine";
    }
    return "unknown";
}

HeadRole head_role_from_string(const std::string& s) {
    if (s == "cls") return HeadRole::Cls;
    if (s == "wgt") return HeadRole::Wgt;
    if (s == "refine") return HeadRole::Refine;
    throw InvalidInput("unknown head role: " + s);
}

LinearHead LinearHead::zeros(HeadRole role, int stage, int in_dim, int out_dim) {
    if (in_dim < 1 || out_dim < 1) throw InvalidInput("head dimensions must be positive");
    return LinearHead{role, stage, Matrix::Zero(in_dim, out_dim), Vector::Zero(out_dim)};
}

LinearHead LinearHead::xavier(HeadRole role, int stage, int in_dim, int out_dim, SplitMix64& rng) {
    LinearHead head = zeros(role, stage, in_dim, out_dim);
    const double limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    for (Eigen::Index i = 0; i < head.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < head.weight.cols(); ++j) head.weight(i, j) = rng.uniform(-limit, limit);
    }
    return head;
}

Matrix LinearHead::logits(const Matrix& features) const {
    if (features.cols() != weight.rows()) throw InvalidInput("feature dimension does not match head");
    if (bias.size() != weight.cols()) throw InvalidInput("head bias size does not match weight");
    Matrix out = features * weight;
    out.rowwise() += bias.transpose();
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        out.row(r) = (logits.row(r).array() - m).exp().matrix();
        out.row(r) /= out.row(r).sum();
    }
    return out;
}

Matrix softmax_cols(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const double m = logits.col(c).maxCoeff();
        out.col(c) = (logits.col(c).array() - m).exp().matrix();
        out.col(c) /= out.col(c).sum();
    }
    return out;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs) {
    // dz_rc = p_rc * (g_rc - sum_c' g_rc' p_rc')
    const Vector inner = (probs.array() * grad_probs.array()).rowwise().sum();
    return (probs.array() * (grad_probs.array().colwise() - inner.array())).matrix();
}

Matrix softmax_cols_backward(const Matrix& probs, const Matrix& grad_probs) {
    const RowVector inner = (probs.array() * grad_probs.array()).colwise().sum();
    return (probs.array() * (grad_probs.array().rowwise() - inner.array())).matrix();
}

ScoreStack forward_wsbdn(const Matrix& features, const LinearHead& cls, const LinearHead& wgt) {
    if (features.rows() < 1) throw InvalidInput("feature matrix has no rows");
    if (cls.out_dim() != wgt.out_dim()) throw InvalidInput("cls and wgt heads differ in output size");
    ScoreStack stack;
    stack.logits_cls = cls.logits(features);
    stack.logits_wgt = wgt.logits(features);
    stack.s = softmax_rows(stack.logits_cls);
    stack.w = softmax_cols(stack.logits_wgt);
    stack.ws = stack.s.cwiseProduct(stack.w);
    // the bound holds exactly in real arithmetic; summation rounding can exceed
    // it by an ulp when one proposal takes all the weight
    stack.s_img = stack.ws.colwise().sum().transpose().cwiseMin(1.0);
    return stack;
}

Matrix forward_ir(const Matrix& features, const LinearHead& head) {
    if (features.rows() < 1) throw InvalidInput("feature matrix has no rows");
    return softmax_rows(head.logits(features));
}

Vector box_level_label(std::span<const int> image_labels) {
    Vector y(static_cast<Eigen::Index>(image_labels.size()) + 1);
    for (std::size_t c = 0; c < image_labels.size(); ++c) {
        if (image_labels[c] != 0 && image_labels[c] != 1) throw InvalidInput("image labels must be 0 or 1");
        y(static_cast<Eigen::Index>(c)) = image_labels[c];
    }
    y(y.size() - 1) = 1.0;
    return y;
}

namespace {

double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

bool inside_clamp(double p) { return p > kProbEpsilon && p < 1.0 - kProbEpsilon; }

void check_labels(const Matrix& scores, const AssignedLabels& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != scores.rows()) {
        throw InvalidInput("label count does not match score rows");
    }
    if (labels.weights.size() != labels.size()) throw InvalidInput("label weights size mismatch");
    for (int y : labels.labels) {
        if (y != AssignedLabels::kIgnored && (y < 0 || y >= scores.cols())) {
            throw InvalidInput("label outside score columns");
        }
    }
}

void check_box_label(const Matrix& scores, const Vector& y) {
    if (y.size() != scores.cols()) throw InvalidInput("box-level label size does not match score columns");
}

}  // namespace

double loss_img(const Vector& image_scores, const Vector& labels) {
    if (image_scores.size() != labels.size()) throw InvalidInput("image score and label sizes differ");
    double loss = 0.0;
    for (Eigen::Index c = 0; c < labels.size(); ++c) {
        const double p = clamp_prob(image_scores(c));
        loss -= labels(c) * std::log(p) + (1.0 - labels(c)) * std::log(1.0 - p);
    }
    return loss;
}

double loss_wsddn_baseline(const ScoreStack& stack, const Vector& image_labels) {
    return loss_img(stack.s_img, image_labels);
}

LossValue loss_cls(const Matrix& scores, const AssignedLabels& labels, bool weighted) {
    check_labels(scores, labels);
    const std::size_t denom = labels.count_labelled();
    if (denom == 0) return {0.0, true};
    double sum = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const int y = labels.labels[r];
        if (y == AssignedLabels::kIgnored) continue;
        const double w = weighted ? labels.weights[r] : 1.0;
        sum += w * std::log(std::max(scores(static_cast<Eigen::Index>(r), y), kProbEpsilon));
    }
    return {-sum / static_cast<double>(denom), false};
}

LossValue loss_cls_ign(const Matrix& scores, const AssignedLabels& labels, const Vector& box_label) {
    check_labels(scores, labels);
    check_box_label(scores, box_label);
    const std::size_t denom = labels.count_ignored();
    if (denom == 0) return {0.0, true};
    double sum = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels.labels[r] != AssignedLabels::kIgnored) continue;
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            if (box_label(c) != 0.0) continue;
            sum += std::log(std::max(1.0 - scores(static_cast<Eigen::Index>(r), c), kProbEpsilon));
        }
    }
    return {-sum / static_cast<double>(denom), false};
}

double loss_oicr_baseline(const Matrix& scores, const AssignedLabels& labels) {
    check_labels(scores, labels);
    if (labels.size() == 0) return 0.0;
    double sum = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const int y = labels.labels[r];
        if (y == AssignedLabels::kIgnored) continue;
        sum += labels.weights[r] * std::log(std::max(scores(static_cast<Eigen::Index>(r), y), kProbEpsilon));
    }
    return -sum / static_cast<double>(labels.size());
}

double loss_total_dthcp(const StageLosses& losses) {
    if (losses.cls.size() != losses.ign.size()) throw InvalidInput("stage loss vectors differ in length");
    double total = losses.base();
    for (std::size_t k = 0; k < losses.cls.size(); ++k) total += losses.refine(k);
    return total;
}

Vector grad_loss_img(const Vector& image_scores, const Vector& labels) {
    if (image_scores.size() != labels.size()) throw InvalidInput("image score and label sizes differ");
    Vector g = Vector::Zero(labels.size());
    for (Eigen::Index c = 0; c < labels.size(); ++c) {
        const double p = image_scores(c);
        if (!inside_clamp(p)) continue;
        g(c) = -labels(c) / p + (1.0 - labels(c)) / (1.0 - p);
    }
    return g;
}

Matrix grad_loss_cls(const Matrix& scores, const AssignedLabels& labels, bool weighted) {
    check_labels(scores, labels);
    Matrix g = Matrix::Zero(scores.rows(), scores.cols());
    const std::size_t denom = labels.count_labelled();
    if (denom == 0) return g;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const int y = labels.labels[r];
        if (y == AssignedLabels::kIgnored) continue;
        const auto row = static_cast<Eigen::Index>(r);
        const double p = scores(row, y);
        if (p <= kProbEpsilon) continue;
        const double w = weighted ? labels.weights[r] : 1.0;
        g(row, y) = -w / (static_cast<double>(denom) * p);
    }
    return g;
}

Matrix grad_loss_cls_ign(const Matrix& scores, const AssignedLabels& labels, const Vector& box_label) {
    check_labels(scores, labels);
    check_box_label(scores, box_label);
    Matrix g = Matrix::Zero(scores.rows(), scores.cols());
    const std::size_t denom = labels.count_ignored();
    if (denom == 0) return g;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels.labels[r] != AssignedLabels::kIgnored) continue;
        const auto row = static_cast<Eigen::Index>(r);
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            if (box_label(c) != 0.0) continue;
            const double q = 1.0 - scores(row, c);
            if (q <= kProbEpsilon) continue;
            g(row, c) = 1.0 / (static_cast<double>(denom) * q);
        }
    }
    return g;
}

Matrix grad_loss_oicr(const Matrix& scores, const AssignedLabels& labels) {
    check_labels(scores, labels);
    Matrix g = Matrix::Zero(scores.rows(), scores.cols());
    if (labels.size() == 0) return g;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        const int y = labels.labels[r];
        if (y == AssignedLabels::kIgnored) continue;
        const auto row = static_cast<Eigen::Index>(r);
        const double p = scores(row, y);
        if (p <= kProbEpsilon) continue;
        g(row, y) = -labels.weights[r] / (static_cast<double>(labels.size()) * p);
    }
    return g;
}

DetectorModel DetectorModel::xavier(int feature_dim, int num_columns, int stages, SplitMix64& rng) {
    DetectorModel model;
    model.cls = LinearHead::xavier(HeadRole::Cls, 0, feature_dim, num_columns, rng);
    model.wgt = LinearHead::xavier(HeadRole::Wgt, 0, feature_dim, num_columns, rng);
    for (int k = 1; k <= stages; ++k) {
        model.refine.push_back(LinearHead::xavier(HeadRole::Refine, k, feature_dim, num_columns, rng));
    }
    return model;
}

std::vector<const LinearHead*> DetectorModel::heads() const {
    std::vector<const LinearHead*> out{&cls, &wgt};
    for (const LinearHead& h : refine) out.push_back(&h);
    return out;
}

std::vector<LinearHead*> DetectorModel::heads() {
    std::vector<LinearHead*> out{&cls, &wgt};
    for (LinearHead& h : refine) out.push_back(&h);
    return out;
}

ForwardPass forward(const DetectorModel& model, const Matrix& features) {
    ForwardPass pass;
    pass.base = forward_wsbdn(features, model.cls, model.wgt);
    for (const LinearHead& h : model.refine) pass.refine.push_back(forward_ir(features, h));
    return pass;
}

const char* to_string(LossId id) {
    switch (id) {
        case LossId::Image: return "img";
        case LossId::ClsUnweighted: return "cls_unweighted";
        case LossId::ClsWeighted: return "cls_weighted";
        case LossId::ClsIgnored: return "cls_ign";
        case LossId::Wsddn: return "wsddn";
        case LossId::Oicr: return "oicr";
        case LossId::Total: return "total";
    }
    return "unknown";
}

namespace {

const Matrix& stage_scores(const ForwardPass& pass, int stage) {
    if (stage == 0) return pass.base.s;
    if (stage < 1 || stage > static_cast<int>(pass.refine.size())) throw InvalidInput("stage out of range");
    return pass.refine[static_cast<std::size_t>(stage - 1)];
}

const AssignedLabels& stage_labels(const Supervision& sup, int stage) {
    if (stage < 0 || stage >= static_cast<int>(sup.stage_labels.size())) {
        throw InvalidInput("no labels for requested stage");
    }
    return sup.stage_labels[static_cast<std::size_t>(stage)];
}

void require_refine_stage(int stage) {
    if (stage < 1) throw InvalidInput("loss requires a refinement stage >= 1");
}

}  // namespace

StageLosses evaluate_stage_losses(const ForwardPass& pass, const Supervision& sup) {
    StageLosses out;
    out.img = loss_img(pass.base.s_img, sup.box_label);
    out.cls0 = loss_cls(pass.base.s, stage_labels(sup, 0), false).value;
    out.ign0 = sup.use_cls_ign ? loss_cls_ign(pass.base.s, stage_labels(sup, 0), sup.box_label).value : 0.0;
    for (int k = 1; k <= static_cast<int>(pass.refine.size()); ++k) {
        const Matrix& s = stage_scores(pass, k);
        out.cls.push_back(loss_cls(s, stage_labels(sup, k), true).value);
        out.ign.push_back(sup.use_cls_ign ? loss_cls_ign(s, stage_labels(sup, k), sup.box_label).value : 0.0);
    }
    return out;
}

double evaluate_loss(LossId id, int stage, const ForwardPass& pass, const Supervision& sup) {
    switch (id) {
        case LossId::Image:
        case LossId::Wsddn: return loss_img(pass.base.s_img, sup.box_label);
        case LossId::ClsUnweighted: return loss_cls(pass.base.s, stage_labels(sup, 0), false).value;
        case LossId::ClsWeighted:
            require_refine_stage(stage);
            return loss_cls(stage_scores(pass, stage), stage_labels(sup, stage), true).value;
        case LossId::ClsIgnored:
            return loss_cls_ign(stage_scores(pass, stage), stage_labels(sup, stage), sup.box_label).value;
        case LossId::Oicr:
            require_refine_stage(stage);
            return loss_oicr_baseline(stage_scores(pass, stage), stage_labels(sup, stage));
        case LossId::Total: return loss_total_dthcp(evaluate_stage_losses(pass, sup));
    }
    throw InvalidInput("unknown loss id");
}

Gradients zero_gradients(const DetectorModel& model) {
    Gradients g;
    for (const LinearHead* h : model.heads()) {
        g.heads.push_back({Matrix::Zero(h->weight.rows(), h->weight.cols()), Vector::Zero(h->bias.size())});
    }
    return g;
}

void accumulate(Gradients& into, const Gradients& g, double scale) {
    if (into.heads.size() != g.heads.size()) throw InvalidInput("gradient head counts differ");
    for (std::size_t i = 0; i < g.heads.size(); ++i) {
        into.heads[i].weight += scale * g.heads[i].weight;
        into.heads[i].bias += scale * g.heads[i].bias;
    }
    if (g.features.size() > 0) {
        if (into.features.size() == 0) into.features = Matrix::Zero(g.features.rows(), g.features.cols());
        into.features += scale * g.features;
    }
}

namespace {

void add_linear(HeadGradient& hg, const Matrix& features, const Matrix& dlogits) {
    hg.weight += features.transpose() * dlogits;
    hg.bias += dlogits.colwise().sum().transpose();
}

void check_pass(const DetectorModel& model, const Matrix& features, const ForwardPass& pass) {
    const Eigen::Index rows = features.rows();
    const Eigen::Index cols = model.cls.out_dim();
    auto same = [&](const Matrix& m) { return m.rows() == rows && m.cols() == cols; };
    if (!same(pass.base.s) || !same(pass.base.w) || pass.base.s_img.size() != cols) {
        throw InvalidInput("forward pass does not match backward inputs");
    }
    if (pass.refine.size() != model.refine.size()) throw InvalidInput("forward pass stage count mismatch");
    for (std::size_t k = 0; k < pass.refine.size(); ++k) {
        if (pass.refine[k].rows() != rows || pass.refine[k].cols() != model.refine[k].out_dim()) {
            throw InvalidInput("forward pass does not match backward inputs");
        }
    }
}

}  // namespace

Gradients backward(LossId id, int stage, const DetectorModel& model, const Matrix& features,
                   const ForwardPass& pass, const Supervision& sup, bool feature_grad) {
    check_pass(model, features, pass);
    const ScoreStack& base = pass.base;

    // Upstream gradients w.r.t. s^(0), w^(0) and each refinement score matrix.
    Matrix d_s = Matrix::Zero(base.s.rows(), base.s.cols());
    Matrix d_w = Matrix::Zero(base.w.rows(), base.w.cols());
    std::vector<Matrix> d_refine;
    for (const Matrix& s : pass.refine) d_refine.push_back(Matrix::Zero(s.rows(), s.cols()));

    auto add_image = [&] {
        const Vector g_img = grad_loss_img(base.s_img, sup.box_label);
        d_s += (base.w.array().rowwise() * g_img.transpose().array()).matrix();
        d_w += (base.s.array().rowwise() * g_img.transpose().array()).matrix();
    };
    auto refine_grad = [&](int k) -> Matrix& {
        require_refine_stage(k);
        if (k > static_cast<int>(d_refine.size())) throw InvalidInput("stage out of range");
        return d_refine[static_cast<std::size_t>(k - 1)];
    };

    switch (id) {
        case LossId::Image:
        case LossId::Wsddn: add_image(); break;
        case LossId::ClsUnweighted: d_s += grad_loss_cls(base.s, stage_labels(sup, 0), false); break;
        case LossId::ClsWeighted:
            refine_grad(stage) += grad_loss_cls(stage_scores(pass, stage), stage_labels(sup, stage), true);
            break;
        case LossId::ClsIgnored:
            if (stage == 0) {
                d_s += grad_loss_cls_ign(base.s, stage_labels(sup, 0), sup.box_label);
            } else {
                refine_grad(stage) += grad_loss_cls_ign(stage_scores(pass, stage), stage_labels(sup, stage), sup.box_label);
            }
            break;
        case LossId::Oicr:
            refine_grad(stage) += grad_loss_oicr(stage_scores(pass, stage), stage_labels(sup, stage));
            break;
        case LossId::Total:
            add_image();
            d_s += grad_loss_cls(base.s, stage_labels(sup, 0), false);
            if (sup.use_cls_ign) d_s += grad_loss_cls_ign(base.s, stage_labels(sup, 0), sup.box_label);
            for (int k = 1; k <= static_cast<int>(d_refine.size()); ++k) {
                const Matrix& s = stage_scores(pass, k);
                refine_grad(k) += grad_loss_cls(s, stage_labels(sup, k), true);
                if (sup.use_cls_ign) refine_grad(k) += grad_loss_cls_ign(s, stage_labels(sup, k), sup.box_label);
            }
            break;
    }

    Gradients out = zero_gradients(model);
    const Matrix dz_cls = softmax_rows_backward(base.s, d_s);
    const Matrix dz_wgt = softmax_cols_backward(base.w, d_w);
    add_linear(out.heads[0], features, dz_cls);
    add_linear(out.heads[1], features, dz_wgt);
    if (feature_grad) {
        out.features = dz_cls * model.cls.weight.transpose() + dz_wgt * model.wgt.weight.transpose();
    }
    for (std::size_t k = 0; k < d_refine.size(); ++k) {
        const Matrix dz = softmax_rows_backward(pass.refine[k], d_refine[k]);
        add_linear(out.heads[k + 2], features, dz);
        if (feature_grad) out.features += dz * model.refine[k].weight.transpose();
    }
    return out;
}

void sgd_step(DetectorModel& model, const Gradients& grads, double lr, double weight_decay) {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidInput("learning rate must be >= 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw InvalidInput("weight decay must be >= 0");
    auto heads = model.heads();
    if (grads.heads.size() != heads.size()) throw InvalidInput("gradient head count does not match model");
    for (std::size_t i = 0; i < heads.size(); ++i) {
        const HeadGradient& g = grads.heads[i];
        if (g.weight.rows() != heads[i]->weight.rows() || g.weight.cols() != heads[i]->weight.cols() ||
            g.bias.size() != heads[i]->bias.size()) {
            throw InvalidInput("gradient shape does not match head");
        }
        if (!g.weight.allFinite() || !g.bias.allFinite()) throw InvalidInput("non-finite gradient");
    }
    for (std::size_t i = 0; i < heads.size(); ++i) {
        LinearHead& h = *heads[i];
        h.weight -= lr * (grads.heads[i].weight + weight_decay * h.weight);
        h.bias -= lr * (grads.heads[i].bias + weight_decay * h.bias);
    }
    ++model.step;
}

}  // namespace dthcp

namespace dthcp {

GradCheckResult finite_difference_check(LossId id, int stage, const DetectorModel& model, const Matrix& features,
                                        const Supervision& sup, double h, bool features_too) {
    if (!(h > 0.0)) throw InvalidInput("finite difference step must be > 0");
    const ForwardPass pass = forward(model, features);
    const Gradients g = backward(id, stage, model, features, pass, sup, features_too);
    GradCheckResult res;
    auto compare = [&](double analytic, double numeric) {
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
        ++res.checked;
    };
    auto loss_at = [&](const DetectorModel& m, const Matrix& f) { return evaluate_loss(id, stage, forward(m, f), sup); };

    DetectorModel probe = model;
    auto heads = probe.heads();
    for (std::size_t i = 0; i < heads.size(); ++i) {
        LinearHead& head = *heads[i];
        for (Eigen::Index k = 0; k < head.weight.size(); ++k) {
            double& theta = head.weight.data()[k];
            const double saved = theta;
            theta = saved + h;
            const double up = loss_at(probe, features);
            theta = saved - h;
            const double down = loss_at(probe, features);
            theta = saved;
            compare(g.heads[i].weight.data()[k], (up - down) / (2.0 * h));
        }
        for (Eigen::Index k = 0; k < head.bias.size(); ++k) {
            double& theta = head.bias(k);
            const double saved = theta;
            theta = saved + h;
            const double up = loss_at(probe, features);
            theta = saved - h;
            const double down = loss_at(probe, features);
            theta = saved;
            compare(g.heads[i].bias(k), (up - down) / (2.0 * h));
        }
    }
    if (features_too) {
        Matrix f = features;
        for (Eigen::Index k = 0; k < f.size(); ++k) {
            const double saved = f.data()[k];
            f.data()[k] = saved + h;
            const double up = loss_at(model, f);
            f.data()[k] = saved - h;
            const double down = loss_at(model, f);
            f.data()[k] = saved;
            compare(g.features.data()[k], (up - down) / (2.0 * h));
        }
    }
    return res;
}

}  // namespace dthcp
