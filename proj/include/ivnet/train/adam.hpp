#ifndef IVNET_TRAIN_ADAM_HPP
#define IVNET_TRAIN_ADAM_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ivnet/autodiff/grad_check.hpp"
#include "ivnet/error.hpp"

namespace ivnet {

struct AdamOptions {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    /// Global gradient-norm clip; 0 disables.
    double clip_norm = 0.0;
    /// Decoupled weight decay; 0 disables.
    double weight_decay = 0.0;
};

/// Adam with bias correction over a fixed list of parameter tensors.
class Adam {
  public:
    Adam(std::vector<ad::NamedTensor> params, AdamOptions opt) : params_(std::move(params)), opt_(opt) {
        first_.reserve(params_.size());
        second_.reserve(params_.size());
        for (const auto &[name, t] : params_) {
            first_.emplace_back(t.size(), 0.0);
            second_.emplace_back(t.size(), 0.0);
        }
    }

    /// Apply one update from the currently accumulated gradients.
    void step() {
        for (auto &[name, t] : params_) {
            for (const double g : t.grad()) {
                if (!std::isfinite(g)) {
                    throw NumericError(fmt::format("adam: non-finite gradient in parameter '{}'", name));
                }
            }
        }
        double clip = 1.0;
        if (opt_.clip_norm > 0.0) {
            double sq = 0.0;
            for (auto &[name, t] : params_) {
                for (const double g : t.grad()) {
                    sq += g * g;
                }
            }
            const double norm = std::sqrt(sq);
            if (norm > opt_.clip_norm) {
                clip = opt_.clip_norm / norm;
            }
        }
        ++steps_;
        const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(steps_));
        const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(steps_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto &t = params_[k].second;
            const auto grad = t.grad();
            auto theta = t.mutable_data();
            auto &m = first_[k];
            auto &u = second_[k];
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double g = grad[i] * clip;
                m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g;
                u[i] = opt_.beta2 * u[i] + (1.0 - opt_.beta2) * g * g;
                const double m_hat = m[i] / bc1;
                const double u_hat = u[i] / bc2;
                theta[i] -= opt_.lr * m_hat / (std::sqrt(u_hat) + opt_.eps);
                if (opt_.weight_decay > 0.0) {
                    theta[i] -= opt_.lr * opt_.weight_decay * theta[i];
                }
            }
        }
    }

    void zero_grad() {
        for (auto &[name, t] : params_) {
            t.zero_grad();
        }
    }

    [[nodiscard]] std::uint64_t steps() const noexcept { return steps_; }
    [[nodiscard]] const AdamOptions &options() const noexcept { return opt_; }
    [[nodiscard]] const std::vector<double> &first_moment(std::size_t k) const { return first_.at(k); }
    [[nodiscard]] const std::vector<double> &second_moment(std::size_t k) const { return second_.at(k); }

  private:
    std::vector<ad::NamedTensor> params_;
    AdamOptions opt_;
    std::vector<std::vector<double>> first_;
    std::vector<std::vector<double>> second_;
    std::uint64_t steps_ = 0;
};

}  // namespace ivnet

#endif
