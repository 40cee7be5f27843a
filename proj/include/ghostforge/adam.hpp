#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ghostforge/params.hpp"

namespace ghostforge {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Standard Adam with bias correction over a ParamStore's trainable
/// parameters. Gradients must be populated before step(); they are zeroed
/// afterwards. Parameters are visited in name order.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(ParamStore& params) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (auto& [name, param] : params) {
            if (!param.trainable) continue;
            if (!param.tensor.has_grad())
                throw ConfigError("adam_step: missing gradient for \"" + name + "\"");
            Moments& mom = state_[name];
            std::vector<double>& value = param.tensor.mutable_data();
            const std::vector<double>& grad = param.tensor.grad();
            if (mom.m.empty()) {
                mom.m.assign(value.size(), 0.0);
                mom.v.assign(value.size(), 0.0);
            }
            for (std::size_t i = 0; i < value.size(); ++i) {
                const double g = grad[i];
                mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * g;
                mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * g * g;
                const double m_hat = mom.m[i] / bc1;
                const double v_hat = mom.v[i] / bc2;
                value[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
            }
            param.tensor.zero_grad();
        }
    }

    long long step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    AdamConfig cfg_;
    std::map<std::string, Moments> state_;
    long long t_ = 0;
};

}  // namespace ghostforge
