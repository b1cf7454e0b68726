#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "petdiff/net.hpp"

namespace petdiff {

// Optimizers update params in place from a same-shaped gradient store.
// State round-trips through named arrays so training can resume bit-exact.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(ParamStore<float>& p, const ParamStore<float>& g) = 0;
    virtual void set_lr(float lr) = 0;
    virtual std::vector<NamedTensor<float>> state_arrays() const = 0;
    virtual void load_state(const std::vector<NamedTensor<float>>& arrays) = 0;
    virtual std::string kind() const = 0;

protected:
    static void check_shapes(const ParamStore<float>& p, const ParamStore<float>& g) {
        if (p.t.size() != g.t.size())
            throw std::invalid_argument("optimizer: param/grad store size mismatch");
        for (size_t i = 0; i < p.t.size(); ++i)
            if (p.t[i].v.size() != g.t[i].v.size())
                throw std::invalid_argument("optimizer: shape mismatch for " + p.t[i].name);
    }
};

class SGDMomentum final : public Optimizer {
public:
    SGDMomentum(float lr, float momentum) : lr_(lr), mu_(momentum) {}

    void step(ParamStore<float>& p, const ParamStore<float>& g) override {
        check_shapes(p, g);
        if (vel_.empty()) init_like(p);
        for (size_t i = 0; i < p.t.size(); ++i) {
            auto& v = vel_[i].v;
            auto& w = p.t[i].v;
            const auto& gr = g.t[i].v;
            for (size_t j = 0; j < w.size(); ++j) {
                v[j] = mu_ * v[j] + gr[j];
                w[j] -= lr_ * v[j];
            }
        }
    }
    void set_lr(float lr) override { lr_ = lr; }
    std::vector<NamedTensor<float>> state_arrays() const override { return vel_; }
    void load_state(const std::vector<NamedTensor<float>>& arrays) override { vel_ = arrays; }
    std::string kind() const override { return "sgd"; }

private:
    void init_like(const ParamStore<float>& p) {
        for (const auto& a : p.t)
            vel_.push_back({"vel." + a.name, a.shape, std::vector<float>(a.v.size(), 0.f)});
    }
    float lr_, mu_;
    std::vector<NamedTensor<float>> vel_;
};

class Adam final : public Optimizer {
public:
    Adam(float lr, float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void step(ParamStore<float>& p, const ParamStore<float>& g) override {
        check_shapes(p, g);
        if (m_.empty()) init_like(p);
        t_ += 1;
        const float c1 = 1.f - float(std::pow(double(b1_), double(t_)));
        const float c2 = 1.f - float(std::pow(double(b2_), double(t_)));
        for (size_t i = 0; i < p.t.size(); ++i) {
            auto& m = m_[i].v;
            auto& v = v_[i].v;
            auto& w = p.t[i].v;
            const auto& gr = g.t[i].v;
            for (size_t j = 0; j < w.size(); ++j) {
                m[j] = b1_ * m[j] + (1.f - b1_) * gr[j];
                v[j] = b2_ * v[j] + (1.f - b2_) * gr[j] * gr[j];
                w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
            }
        }
    }
    void set_lr(float lr) override { lr_ = lr; }
    std::vector<NamedTensor<float>> state_arrays() const override {
        auto out = m_;
        out.insert(out.end(), v_.begin(), v_.end());
        out.push_back({"adam.t", {1}, {float(t_)}});
        return out;
    }
    void load_state(const std::vector<NamedTensor<float>>& arrays) override {
        m_.clear();
        v_.clear();
        t_ = 0;
        for (const auto& a : arrays) {
            if (a.name == "adam.t")
                t_ = int64_t(a.v.at(0));
            else if (a.name.rfind("m.", 0) == 0)
                m_.push_back(a);
            else if (a.name.rfind("v.", 0) == 0)
                v_.push_back(a);
            else
                throw std::invalid_argument("adam: unknown state array " + a.name);
        }
    }
    std::string kind() const override { return "adam"; }

private:
    void init_like(const ParamStore<float>& p) {
        for (const auto& a : p.t) {
            m_.push_back({"m." + a.name, a.shape, std::vector<float>(a.v.size(), 0.f)});
            v_.push_back({"v." + a.name, a.shape, std::vector<float>(a.v.size(), 0.f)});
        }
    }
    float lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
    std::vector<NamedTensor<float>> m_, v_;
};

inline std::unique_ptr<Optimizer> make_optimizer(const std::string& kind, float lr,
                                                 float momentum) {
    if (kind == "sgd") return std::make_unique<SGDMomentum>(lr, momentum);
    if (kind == "adam") return std::make_unique<Adam>(lr);
    throw std::invalid_argument("make_optimizer: unknown kind " + kind);
}

}  // namespace petdiff
