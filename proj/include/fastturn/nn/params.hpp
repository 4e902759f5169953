#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fastturn/nn/tape.hpp"
#include "fastturn/nn/tensor.hpp"

namespace fastturn::nn {

using GradMap = std::map<std::string, Tensor>;

// Named parameter store. Iteration order (and hence checkpoint layout) is the
// sorted name order, so identical parameter sets serialize to identical bytes.
class ParameterSet {
public:
    void insert(const std::string& name, Tensor t, bool trainable = true);
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool trainable(const std::string& name) const;
    void set_trainable(const std::string& name, bool flag);
    // trainable iff the name starts with one of the prefixes
    void set_trainable_only(const std::vector<std::string>& prefixes);

    std::vector<std::string> names() const;
    std::vector<std::string> trainable_names() const;
    std::size_t size() const { return params_.size(); }
    std::int64_t total_scalars() const;

    const std::map<std::string, Tensor>& entries() const { return params_; }

    // "FTCK" checkpoint: magic, u32 version, then per-parameter records of
    // (u32 name length, name, u32 rank, u32 dims..., f64 values...), all
    // little-endian, in sorted name order.
    std::vector<std::uint8_t> to_bytes() const;
    static ParameterSet from_bytes(const std::vector<std::uint8_t>& bytes);
    void save(const std::string& path) const;
    static ParameterSet load(const std::string& path);

private:
    std::map<std::string, Tensor> params_;
    std::map<std::string, bool> trainable_;
};

// Adam with bias correction; frozen parameters are never touched. The caller
// supplies the (already warmup-ramped) learning rate per step.
class Adam {
public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParameterSet& params, const GradMap& grads, double lr);
    std::int64_t steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

// One optimizer step at an explicit schedule point (spec-level entry point;
// Adam::step is the stateful engine behind it).
void optimizer_step(ParameterSet& params, const GradMap& grads, Adam& opt, double lr);

// Binds ParameterSet entries into a tape as leaves, once per name, honoring
// the trainable flags. After backward(), collect_grads() gathers the gradient
// of every trainable leaf that was used.
class ParamVars {
public:
    ParamVars(Tape& tape, const ParameterSet& params, bool training)
        : tape_(&tape), params_(&params), training_(training) {}

    Var operator()(const std::string& name);
    GradMap collect_grads() const;

private:
    Tape* tape_;
    const ParameterSet* params_;
    bool training_;
    std::map<std::string, Var> bound_;
};

} // namespace fastturn::nn
