#pragma once

#include <string>
#include <vector>

#include "cgc/accounting.hpp"
#include "cgc/cgc.hpp"
#include "cgc/gradcheck.hpp"
#include "cgc/norm.hpp"
#include "cgc/ops.hpp"

namespace cgc {

// The named gradient-check suite behind `cgc gradcheck`: every primitive op,
// the full layer under each ablation variant, and the sequence variant.

struct GradcheckResult {
  std::string name;
  double max_err = 0.0;
  double threshold = 0.0;
  bool passed() const { return max_err < threshold; }
};

namespace detail {

// Packs a layer's input and every learnable tensor into the flat input list
// gradcheck perturbs; `slots` names them in order.
struct LayerProbe {
  CgcConfig cfg;
  CgcParams<double> tmpl;
  Mode mode = Mode::eval;
  std::vector<std::string> slots;

  static LayerProbe make(const CgcConfig& cfg, Mode mode, std::uint64_t seed) {
    LayerProbe pr;
    pr.cfg = cfg;
    pr.mode = mode;
    Rng rng(seed);
    pr.tmpl = make_cgc_params<double>(cfg, rng);
    auto prime = [&rng](AffineNorm<double>& nm) {
      rng.fill_uniform(nm.gamma, 0.6, 1.4);
      rng.fill_uniform(nm.beta, -0.3, 0.3);
      if (nm.kind == NormKind::batch_channel) {
        rng.fill_uniform(nm.running_mean, -0.2, 0.2);
        rng.fill_uniform(nm.running_var, 0.8, 1.2);
        nm.stats_initialized = true;
      }
    };
    if (cfg.variant == CgcVariant::sequence) {
      prime(pr.tmpl.norm_c1);
      pr.slots = {"X", "W", "E", "D_c", "gamma_c1", "beta_c1"};
      return pr;
    }
    if (cfg.has_norm_c1()) prime(pr.tmpl.norm_c1);
    if (cfg.has_norm_c2() || cfg.has_norm_c2_solo()) prime(pr.tmpl.norm_c2);
    if (cfg.has_interact()) prime(pr.tmpl.norm_o);
    pr.slots = {"X", "W", "E"};
    if (cfg.has_E2()) pr.slots.push_back("E2");
    if (cfg.has_interact()) pr.slots.push_back("I");
    if (cfg.has_D_c()) pr.slots.push_back("D_c");
    if (cfg.has_D_o()) pr.slots.push_back("D_o");
    if (cfg.has_norm_c1()) {
      pr.slots.push_back("gamma_c1");
      pr.slots.push_back("beta_c1");
    }
    if (cfg.has_norm_c2() || cfg.has_norm_c2_solo()) {
      pr.slots.push_back("gamma_c2");
      pr.slots.push_back("beta_c2");
    }
    if (cfg.has_interact()) {
      pr.slots.push_back("gamma_o");
      pr.slots.push_back("beta_o");
    }
    return pr;
  }

  std::vector<Tensor<double>> pack(const Tensor<double>& X) const {
    std::vector<Tensor<double>> in{X};
    for (std::size_t i = 1; i < slots.size(); ++i) in.push_back(slot_value(slots[i]));
    return in;
  }

  Tensor<double> slot_value(const std::string& s) const {
    if (s == "W") return tmpl.W;
    if (s == "E") return tmpl.E;
    if (s == "E2") return tmpl.E2;
    if (s == "I") return tmpl.I;
    if (s == "D_c") return tmpl.D_c;
    if (s == "D_o") return tmpl.D_o;
    if (s == "gamma_c1") return tmpl.norm_c1.gamma;
    if (s == "beta_c1") return tmpl.norm_c1.beta;
    if (s == "gamma_c2") return tmpl.norm_c2.gamma;
    if (s == "beta_c2") return tmpl.norm_c2.beta;
    if (s == "gamma_o") return tmpl.norm_o.gamma;
    if (s == "beta_o") return tmpl.norm_o.beta;
    throw std::invalid_argument("unknown slot " + s);
  }

  CgcParams<double> rebuild(const std::vector<Tensor<double>>& in) const {
    CgcParams<double> p = tmpl;
    for (std::size_t i = 1; i < slots.size(); ++i) {
      const std::string& s = slots[i];
      if (s == "W") p.W = in[i];
      else if (s == "E") p.E = in[i];
      else if (s == "E2") p.E2 = in[i];
      else if (s == "I") p.I = in[i];
      else if (s == "D_c") p.D_c = in[i];
      else if (s == "D_o") p.D_o = in[i];
      else if (s == "gamma_c1") p.norm_c1.gamma = in[i];
      else if (s == "beta_c1") p.norm_c1.beta = in[i];
      else if (s == "gamma_c2") p.norm_c2.gamma = in[i];
      else if (s == "beta_c2") p.norm_c2.beta = in[i];
      else if (s == "gamma_o") p.norm_o.gamma = in[i];
      else if (s == "beta_o") p.norm_o.beta = in[i];
    }
    return p;
  }

  std::vector<Tensor<double>> grads_to_list(const Tensor<double>& dX,
                                            const CgcGrads<double>& g) const {
    std::vector<Tensor<double>> out{dX};
    for (std::size_t i = 1; i < slots.size(); ++i) {
      const std::string& s = slots[i];
      if (s == "W") out.push_back(g.W);
      else if (s == "E") out.push_back(g.E);
      else if (s == "E2") out.push_back(g.E2);
      else if (s == "I") out.push_back(g.I);
      else if (s == "D_c") out.push_back(g.D_c);
      else if (s == "D_o") out.push_back(g.D_o);
      else if (s == "gamma_c1") out.push_back(g.gamma_c1);
      else if (s == "beta_c1") out.push_back(g.beta_c1);
      else if (s == "gamma_c2") out.push_back(g.gamma_c2);
      else if (s == "beta_c2") out.push_back(g.beta_c2);
      else if (s == "gamma_o") out.push_back(g.gamma_o);
      else if (s == "beta_o") out.push_back(g.beta_o);
    }
    return out;
  }
};

inline DualOp<double> layer_dual_op(const LayerProbe& probe) {
  DualOp<double> op;
  op.forward = [probe](const std::vector<Tensor<double>>& in) {
    CgcParams<double> p = probe.rebuild(in);
    if (probe.cfg.variant == CgcVariant::sequence) return cgc_seq_forward(in[0], probe.cfg, p);
    return cgc_forward(in[0], probe.cfg, p, probe.mode);
  };
  op.vjp = [probe](const std::vector<Tensor<double>>& in, const Tensor<double>& up) {
    CgcParams<double> p = probe.rebuild(in);
    CgcGrads<double> grads = make_zero_grads(probe.cfg, p);
    Tensor<double> dX;
    if (probe.cfg.variant == CgcVariant::sequence) {
      CgcSeqCache<double> cache;
      cgc_seq_forward(in[0], probe.cfg, p, &cache);
      dX = cgc_seq_backward(up, probe.cfg, p, cache, grads);
    } else {
      CgcCache<double> cache;
      cgc_forward(in[0], probe.cfg, p, probe.mode, &cache);
      dX = cgc_backward(up, probe.cfg, p, cache, grads);
    }
    return probe.grads_to_list(dX, grads);
  };
  return op;
}

}  // namespace detail

inline CgcConfig gradcheck_layer_config(const std::string& variant) {
  CgcConfig cfg;
  cfg.in_channels = 4;
  cfg.out_channels = 4;
  cfg.kernel = {3, 3};
  cfg.stride = {1, 1};
  cfg.padding = {1, 1};
  return apply_ablation(cfg, variant);
}

inline CgcConfig gradcheck_sequence_config() {
  CgcConfig cfg;
  cfg.variant = CgcVariant::sequence;
  cfg.in_channels = 8;
  cfg.out_channels = 8;
  cfg.kernel = {5};
  cfg.heads = 4;
  cfg.channel_interacting = false;
  return cfg;
}

/// Runs the whole suite (or the checks whose name contains `filter`).
inline std::vector<GradcheckResult> run_gradcheck_suite(std::uint64_t seed,
                                                        const std::string& filter = "") {
  std::vector<GradcheckResult> results;
  auto want = [&filter](const std::string& name) {
    return filter.empty() || name.find(filter) != std::string::npos;
  };
  auto record = [&results](const std::string& name, double err, double threshold) {
    results.push_back({name, err, threshold});
  };
  Rng rng(seed * 11400714819323198485ull + 1);
  auto rt = [&rng](Shape s, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(s));
    rng.fill_uniform(t, lo, hi);
    return t;
  };

  if (want("op:grouped_linear")) {
    DualOp<double> op;
    op.forward = [](const std::vector<Tensor<double>>& in) {
      return grouped_linear(in[0], in[1], 2);
    };
    op.vjp = [](const std::vector<Tensor<double>>& in, const Tensor<double>& up) {
      Tensor<double> dX = Tensor<double>::zeros_like(in[0]);
      Tensor<double> dW = Tensor<double>::zeros_like(in[1]);
      grouped_linear_backward(in[0], in[1], 2, up, &dX, &dW);
      return std::vector<Tensor<double>>{dX, dW};
    };
    record("op:grouped_linear", gradcheck(op, {rt({3, 6}), rt({3, 2})}, 1e-5, seed), 1e-9);
  }
  if (want("op:conv2d")) {
    ConvSpec spec{{1, 1}, {1, 1}, 1};
    DualOp<double> op;
    op.forward = [spec](const std::vector<Tensor<double>>& in) {
      return conv2d(in[0], in[1], spec);
    };
    op.vjp = [spec](const std::vector<Tensor<double>>& in, const Tensor<double>& up) {
      Tensor<double> dX = Tensor<double>::zeros_like(in[0]);
      Tensor<double> dW = Tensor<double>::zeros_like(in[1]);
      conv2d_backward(in[0], in[1], spec, up, &dX, &dW);
      return std::vector<Tensor<double>>{dX, dW};
    };
    record("op:conv2d", gradcheck(op, {rt({1, 2, 5, 5}), rt({3, 2, 3, 3})}, 1e-5, seed), 1e-6);
  }
  if (want("op:avg_pool")) {
    DualOp<double> op;
    op.forward = [](const std::vector<Tensor<double>>& in) {
      return adaptive_pool(in[0], {3, 3}, PoolKind::avg);
    };
    op.vjp = [](const std::vector<Tensor<double>>& in, const Tensor<double>& up) {
      return std::vector<Tensor<double>>{
          adaptive_pool_backward(up, in[0].shape, {3, 3}, PoolKind::avg)};
    };
    record("op:avg_pool", gradcheck(op, {rt({1, 2, 6, 6})}, 1e-5, seed), 1e-6);
  }
  if (want("op:max_pool")) {
    DualOp<double> op;
    op.forward = [](const std::vector<Tensor<double>>& in) {
      return adaptive_pool(in[0], {2, 2}, PoolKind::max);
    };
    op.vjp = [](const std::vector<Tensor<double>>& in, const Tensor<double>& up) {
      std::vector<std::size_t> argmax;
      adaptive_pool(in[0], {2, 2}, PoolKind::max, &argmax);
      return std::vector<Tensor<double>>{
          adaptive_pool_backward(up, in[0].shape, {2, 2}, PoolKind::max, &argmax)};
    };
    record("op:max_pool", gradcheck(op, {rt({1, 2, 5, 5})}, 1e-6, seed), 1e-5);
  }
  if (want("op:batch_norm")) {
    DualOp<double> op;
    op.forward = [](const std::vector<Tensor<double>>& in) {
      auto nm = AffineNorm<double>::batch(3);
      nm.gamma = in[1];
      nm.beta = in[2];
      return norm_forward(nm, in[0], Mode::train);
    };
    op.vjp = [](const std::vector<Tensor<double>>& in, const Tensor<double>& up) {
      auto nm = AffineNorm<double>::batch(3);
      nm.gamma = in[1];
      nm.beta = in[2];
      NormCache<double> cache;
      norm_forward(nm, in[0], Mode::train, &cache);
      Tensor<double> dg({3}), db({3});
      Tensor<double> dX = norm_backward(nm, cache, up, &dg, &db);
      return std::vector<Tensor<double>>{dX, dg, db};
    };
    record("op:batch_norm", gradcheck(op, {rt({2, 3, 4}), rt({3}, 0.6, 1.4), rt({3}, -0.3, 0.3)},
                                      1e-5, seed),
           1e-6);
  }
  if (want("op:sigmoid")) {
    DualOp<double> op;
    op.forward = [](const std::vector<Tensor<double>>& in) { return sigmoid(in[0]); };
    op.vjp = [](const std::vector<Tensor<double>>& in, const Tensor<double>& up) {
      return std::vector<Tensor<double>>{sigmoid_backward(sigmoid(in[0]), up)};
    };
    record("op:sigmoid", gradcheck(op, {rt({3, 4}, -3.0, 3.0)}, 1e-5, seed), 1e-6);
  }

  std::vector<std::string> variants = ablation_names();
  for (const auto& v : variants) {
    const std::string name = "layer:" + v;
    if (!want(name)) continue;
    auto probe = detail::LayerProbe::make(gradcheck_layer_config(v), Mode::eval, seed + 17);
    Tensor<double> X = rt({2, 4, 6, 6});
    record(name, gradcheck(detail::layer_dual_op(probe), probe.pack(X), 1e-5, seed), 1e-4);
  }
  if (want("layer:default-train")) {
    auto probe = detail::LayerProbe::make(gradcheck_layer_config("default"), Mode::train, seed + 19);
    Tensor<double> X = rt({3, 4, 6, 6});
    record("layer:default-train", gradcheck(detail::layer_dual_op(probe), probe.pack(X), 1e-5, seed),
           1e-4);
  }
  if (want("layer:sequence")) {
    auto probe = detail::LayerProbe::make(gradcheck_sequence_config(), Mode::train, seed + 23);
    Tensor<double> X = rt({2, 8, 12});
    record("layer:sequence", gradcheck(detail::layer_dual_op(probe), probe.pack(X), 1e-5, seed),
           1e-4);
  }
  return results;
}

}  // namespace cgc
