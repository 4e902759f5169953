#include "fastturn/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "fastturn/common.hpp"

namespace fastturn::nn {

void ParameterSet::insert(const std::string& name, Tensor t, bool trainable) {
    if (params_.count(name)) throw std::invalid_argument("ParameterSet: duplicate name " + name);
    params_.emplace(name, std::move(t));
    trainable_[name] = trainable;
}

Tensor& ParameterSet::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("ParameterSet: unknown parameter " + name);
    return it->second;
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("ParameterSet: unknown parameter " + name);
    return it->second;
}

bool ParameterSet::trainable(const std::string& name) const {
    auto it = trainable_.find(name);
    if (it == trainable_.end()) throw std::invalid_argument("ParameterSet: unknown parameter " + name);
    return it->second;
}

void ParameterSet::set_trainable(const std::string& name, bool flag) {
    if (!params_.count(name)) throw std::invalid_argument("ParameterSet: unknown parameter " + name);
    trainable_[name] = flag;
}

void ParameterSet::set_trainable_only(const std::vector<std::string>& prefixes) {
    for (auto& [name, flag] : trainable_) {
        flag = false;
        for (const auto& p : prefixes)
            if (name.rfind(p, 0) == 0) {
                flag = true;
                break;
            }
    }
}

std::vector<std::string> ParameterSet::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [n, t] : params_) out.push_back(n);
    return out;
}

std::vector<std::string> ParameterSet::trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [n, t] : params_)
        if (trainable_.at(n)) out.push_back(n);
    return out;
}

std::int64_t ParameterSet::total_scalars() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
    out.push_back(static_cast<std::uint8_t>(x & 0xff));
    out.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((x >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((x >> 24) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::vector<std::uint8_t>& b;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (pos + 4 > b.size()) throw IoError("checkpoint: truncated");
        std::uint32_t x = 0;
        for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 4;
        return x;
    }

    double f64() {
        if (pos + 8 > b.size()) throw IoError("checkpoint: truncated");
        std::uint64_t x = 0;
        for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[pos + static_cast<std::size_t>(i)]) << (8 * i);
        pos += 8;
        double d;
        std::memcpy(&d, &x, 8);
        return d;
    }

    std::string str(std::size_t n) {
        if (pos + n > b.size()) throw IoError("checkpoint: truncated");
        std::string s(reinterpret_cast<const char*>(b.data() + pos), n);
        pos += n;
        return s;
    }
};

} // namespace

std::vector<std::uint8_t> ParameterSet::to_bytes() const {
    std::vector<std::uint8_t> out;
    out.push_back('F');
    out.push_back('T');
    out.push_back('C');
    out.push_back('K');
    put_u32(out, 1);
    for (const auto& [name, t] : params_) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (double x : t.v) put_f64(out, x);
    }
    return out;
}

ParameterSet ParameterSet::from_bytes(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    if (r.str(4) != "FTCK") throw IoError("checkpoint: bad magic");
    const std::uint32_t version = r.u32();
    if (version != 1) throw IoError("checkpoint: unsupported version " + std::to_string(version));
    ParameterSet ps;
    while (r.pos < bytes.size()) {
        const std::uint32_t nlen = r.u32();
        const std::string name = r.str(nlen);
        const std::uint32_t rank = r.u32();
        std::vector<int> shape(rank);
        std::int64_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape[i] = static_cast<int>(r.u32());
            count *= shape[i];
        }
        Tensor t = Tensor::zeros(shape);
        for (std::int64_t i = 0; i < count; ++i) t.v[static_cast<std::size_t>(i)] = r.f64();
        ps.insert(name, std::move(t));
    }
    return ps;
}

void ParameterSet::save(const std::string& path) const {
    const auto bytes = to_bytes();
    // write to a temp name then rename so partial writes never corrupt a
    // prior checkpoint
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for write: " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("rename failed: " + path);
}

ParameterSet ParameterSet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

void Adam::step(ParameterSet& params, const GradMap& grads, double lr) {
    // validate first so a bad key leaves no partial update behind
    for (const auto& [name, g] : grads) {
        if (!params.has(name)) throw std::invalid_argument("optimizer_step: no parameter named " + name);
        if (!params.trainable(name))
            throw std::invalid_argument("optimizer_step: gradient for frozen parameter " + name);
        if (!params.at(name).same_shape(g))
            throw std::invalid_argument("optimizer_step: gradient shape mismatch for " + name);
        if (!g.all_finite()) throw std::invalid_argument("optimizer_step: non-finite gradient for " + name);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.at(name);
        auto mit = m_.find(name);
        if (mit == m_.end()) {
            m_.emplace(name, Tensor::zeros(p.shape));
            v_.emplace(name, Tensor::zeros(p.shape));
        }
        Tensor& m = m_.at(name);
        Tensor& v = v_.at(name);
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            m.v[i] = beta1_ * m.v[i] + (1.0 - beta1_) * g.v[i];
            v.v[i] = beta2_ * v.v[i] + (1.0 - beta2_) * g.v[i] * g.v[i];
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.v[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void optimizer_step(ParameterSet& params, const GradMap& grads, Adam& opt, double lr) {
    opt.step(params, grads, lr);
}

Var ParamVars::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    const bool ng = training_ && params_->trainable(name);
    Var v = tape_->leaf(params_->at(name), ng);
    bound_.emplace(name, v);
    return v;
}

GradMap ParamVars::collect_grads() const {
    GradMap out;
    for (const auto& [name, var] : bound_) {
        if (!tape_->needs_grad(var)) continue;
        out.emplace(name, tape_->grad(var));
    }
    return out;
}

} // namespace fastturn::nn
