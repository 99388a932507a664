#ifndef TEXTKP_LOSSES_HPP
#define TEXTKP_LOSSES_HPP

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace textkp {

struct LossError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LossConfig {
    double alpha = 2.0;
    double beta = 4.0;
    double lambda_mask = 0.1;
    double lambda_link = 1.0;
    double epsilon = 1e-6; // probability clamp
};

struct LossValueGrad {
    double value = 0.0;
    std::vector<std::vector<double>> grad; // one plane per prediction plane
};

namespace detail {

// Pairwise tree sum for reproducible reductions.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

} // namespace detail

// Focal-style keypoint loss over the three heat planes:
//   y == 1: (1-p)^a log p, else (1-y)^b p^a log(1-p), summed, scaled by -1/N
// with N = number of pixels where y == 1 (floored at 1 is an error: N must be >= 1).
inline LossValueGrad keypoint_loss(const std::vector<std::vector<double>>& pred,
                                   const std::vector<std::vector<double>>& target,
                                   const LossConfig& cfg = {}) {
    if (pred.size() != target.size()) throw LossError("plane count mismatch");
    size_t n_pos = 0;
    for (const auto& plane : target)
        for (double y : plane)
            if (y == 1.0) ++n_pos;
    if (n_pos == 0) throw LossError("no positive keypoint pixels (N = 0)");
    const double inv_n = 1.0 / static_cast<double>(n_pos);
    const double a = cfg.alpha, b = cfg.beta;

    LossValueGrad out;
    std::vector<double> terms;
    for (size_t c = 0; c < pred.size(); ++c) {
        if (pred[c].size() != target[c].size()) throw LossError("plane size mismatch");
        out.grad.emplace_back(pred[c].size(), 0.0);
        for (size_t i = 0; i < pred[c].size(); ++i) {
            const double p = std::clamp(pred[c][i], cfg.epsilon, 1.0 - cfg.epsilon);
            const double y = target[c][i];
            if (y == 1.0) {
                const double om = 1.0 - p;
                terms.push_back(std::pow(om, a) * std::log(p));
                out.grad[c][i] =
                    -inv_n * (-a * std::pow(om, a - 1.0) * std::log(p) + std::pow(om, a) / p);
            } else {
                const double w = std::pow(1.0 - y, b);
                terms.push_back(w * std::pow(p, a) * std::log(1.0 - p));
                out.grad[c][i] = -inv_n * w *
                                 (a * std::pow(p, a - 1.0) * std::log(1.0 - p) -
                                  std::pow(p, a) / (1.0 - p));
            }
        }
    }
    out.value = -inv_n * detail::pairwise_sum(terms);
    return out;
}

// Mean binary cross-entropy over one plane.
inline LossValueGrad mask_loss(const std::vector<double>& pred, const std::vector<double>& target,
                               const LossConfig& cfg = {}) {
    if (pred.size() != target.size()) throw LossError("plane size mismatch");
    if (pred.empty()) throw LossError("empty plane");
    const double inv_m = 1.0 / static_cast<double>(pred.size());
    LossValueGrad out;
    out.grad.emplace_back(pred.size(), 0.0);
    std::vector<double> terms(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], cfg.epsilon, 1.0 - cfg.epsilon);
        const double y = target[i];
        terms[i] = y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        out.grad[0][i] = -inv_m * (y / p - (1.0 - y) / (1.0 - p));
    }
    out.value = -inv_m * detail::pairwise_sum(terms);
    return out;
}

inline double smooth_l1(double e) {
    const double ae = std::abs(e);
    return ae < 1.0 ? 0.5 * e * e : ae - 0.5;
}
inline double smooth_l1_grad(double e) {
    return std::abs(e) < 1.0 ? e : (e > 0 ? 1.0 : -1.0);
}

// Smooth-L1 over the 8 link planes, supervised only at valid pixels.
// valid holds one plane per link direction covering its (dx, dy) pair;
// the mean runs over all supervised entries.
inline LossValueGrad link_loss(const std::vector<std::vector<double>>& pred,
                               const std::vector<std::vector<double>>& target,
                               const std::vector<std::vector<uint8_t>>& valid) {
    if (pred.size() != 8 || target.size() != 8 || valid.size() != 4)
        throw LossError("expected 8 link planes and 4 validity planes");
    size_t count = 0;
    for (int d = 0; d < 4; ++d)
        for (uint8_t v : valid[d])
            if (v) count += 2;
    if (count == 0) throw LossError("no valid link pixels");
    const double inv = 1.0 / static_cast<double>(count);

    LossValueGrad out;
    std::vector<double> terms;
    for (int c = 0; c < 8; ++c) {
        if (pred[c].size() != target[c].size() || pred[c].size() != valid[c / 2].size())
            throw LossError("plane size mismatch");
        out.grad.emplace_back(pred[c].size(), 0.0);
        for (size_t i = 0; i < pred[c].size(); ++i) {
            if (!valid[c / 2][i]) continue;
            const double e = pred[c][i] - target[c][i];
            terms.push_back(smooth_l1(e));
            out.grad[c][i] = inv * smooth_l1_grad(e);
        }
    }
    out.value = inv * detail::pairwise_sum(terms);
    return out;
}

// L = L_kp + lambda_mask * L_mask + lambda_link * L_link
inline double total_loss(double kp, double mask, double link, const LossConfig& cfg = {}) {
    return kp + cfg.lambda_mask * mask + cfg.lambda_link * link;
}

} // namespace textkp

#endif
