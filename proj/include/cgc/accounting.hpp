#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgc/cgc.hpp"
#include "cgc/tensor.hpp"

namespace cgc {

// Analytic parameter and multiply-accumulate accounting over declarative
// architecture descriptors. Counts never instantiate tensors.

enum class LayerKind { conv, linear, norm, act, pool, global_pool, residual_add };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv: return "conv";
    case LayerKind::linear: return "linear";
    case LayerKind::norm: return "norm";
    case LayerKind::act: return "act";
    case LayerKind::pool: return "pool";
    case LayerKind::global_pool: return "global_pool";
    case LayerKind::residual_add: return "residual_add";
  }
  return "?";
}

struct LayerDescriptor {
  std::string id;
  std::string stage;
  LayerKind kind = LayerKind::conv;
  std::size_t in = 0, out = 0;
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
  std::vector<std::size_t> padding;
  std::size_t groups = 1;
  bool bias = false;
  PoolKind pool = PoolKind::avg;
  bool parallel = false;  // shortcut branch: consumes the block input, leaves the chain alone
  bool gated = false;     // conv replaced by a context-gated conv
  CgcConfig cgc;          // populated iff gated

  std::size_t kernel_size() const { return shape_numel(kernel); }
};

// Raw descriptor entry: a primitive layer or a residual-stage macro.
struct ArchEntry {
  std::string kind;
  std::string id;
  std::string stage;
  std::size_t in = 0, out = 0, width = 0, blocks = 0, channels = 0;
  std::vector<std::size_t> kernel, stride, padding;
  std::size_t stage_stride = 1;
  bool bias = false;
  std::string pool = "avg";
};

struct ArchDescriptor {
  std::string name;
  Shape input_shape;  // (c, h, w)
  std::vector<ArchEntry> entries;
};

struct GatingPlan {
  bool enabled = false;
  std::optional<std::set<std::string>> stages;  // nullopt = every stage
  std::string variant = "default";

  bool covers(const std::string& stage) const {
    if (!enabled) return false;
    if (!stages) return true;
    return stages->count(stage) > 0;
  }
};

/// Table-3(a)-style ablation switches, shared by the layer, the accounting
/// and the CLI.
inline std::vector<std::string> ablation_names() {
  return {"default", "only-g1", "only-g2", "product", "g1-full", "d-full",
          "shared-norm", "two-e", "shared-d", "pool-2x", "maxpool"};
}

inline CgcConfig apply_ablation(CgcConfig cfg, const std::string& name) {
  if (name == "default" || name.empty()) return cfg;
  if (name == "only-g1") cfg.combine = GateCombine::only_g1;
  else if (name == "only-g2") cfg.combine = GateCombine::only_g2;
  else if (name == "product") cfg.combine = GateCombine::product;
  else if (name == "g1-full") cfg.groups = 1;
  else if (name == "d-full") cfg.latent = cfg.kernel_size();
  else if (name == "shared-norm") cfg.shared_norm = true;
  else if (name == "two-e") cfg.two_encoders = true;
  else if (name == "shared-d") cfg.shared_decoder = true;
  else if (name == "pool-2x") {
    cfg.pooled.clear();
    for (std::size_t k : cfg.kernel) cfg.pooled.push_back(2 * k);
  } else if (name == "maxpool") cfg.pool_kind = PoolKind::max;
  else throw std::invalid_argument("unknown ablation variant '" + name + "'");
  return cfg;
}

inline CgcConfig cgc_config_for_conv(const LayerDescriptor& conv, const std::string& variant) {
  CgcConfig cfg;
  cfg.in_channels = conv.in;
  cfg.out_channels = conv.out;
  cfg.kernel = conv.kernel;
  cfg.stride = conv.stride;
  cfg.padding = conv.padding;
  cfg.variant = conv.kernel.size() == 1 ? CgcVariant::conv1d : CgcVariant::conv2d;
  return apply_ablation(cfg, variant);
}

// ---------------------------------------------------------------------------
// JSON loading and macro expansion.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::size_t> json_extents(const nlohmann::json& j, std::size_t rank_default) {
  std::vector<std::size_t> v;
  if (j.is_number_integer()) {
    v.assign(rank_default, j.get<std::size_t>());
  } else {
    for (const auto& e : j) v.push_back(e.get<std::size_t>());
  }
  return v;
}

}  // namespace detail

inline ArchDescriptor load_arch_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open architecture descriptor: " + path);
  nlohmann::json j;
  is >> j;
  ArchDescriptor arch;
  arch.name = j.at("name").get<std::string>();
  for (const auto& e : j.at("input_shape")) arch.input_shape.push_back(e.get<std::size_t>());
  if (arch.input_shape.size() != 3)
    throw std::invalid_argument("descriptor " + arch.name + ": input_shape must be (c,h,w)");
  for (const auto& je : j.at("layers")) {
    ArchEntry e;
    e.kind = je.at("kind").get<std::string>();
    if (je.contains("id")) e.id = je.at("id").get<std::string>();
    if (je.contains("stage")) e.stage = je.at("stage").get<std::string>();
    if (je.contains("in")) e.in = je.at("in").get<std::size_t>();
    if (je.contains("out")) e.out = je.at("out").get<std::size_t>();
    if (je.contains("width")) e.width = je.at("width").get<std::size_t>();
    if (je.contains("blocks")) e.blocks = je.at("blocks").get<std::size_t>();
    if (je.contains("channels")) e.channels = je.at("channels").get<std::size_t>();
    if (je.contains("kernel")) e.kernel = detail::json_extents(je.at("kernel"), 2);
    if (je.contains("stride")) {
      if (je.at("stride").is_number_integer() && (e.kind == "plain_stage" || e.kind == "bottleneck_stage"))
        e.stage_stride = je.at("stride").get<std::size_t>();
      else
        e.stride = detail::json_extents(je.at("stride"), e.kernel.empty() ? 2 : e.kernel.size());
    }
    if (je.contains("padding")) e.padding = detail::json_extents(je.at("padding"), e.kernel.empty() ? 2 : e.kernel.size());
    if (je.contains("bias")) e.bias = je.at("bias").get<bool>();
    if (je.contains("pool")) e.pool = je.at("pool").get<std::string>();
    arch.entries.push_back(std::move(e));
  }
  return arch;
}

namespace detail {

inline LayerDescriptor prim_conv(std::string id, std::string stage, std::size_t in, std::size_t out,
                                 std::vector<std::size_t> kernel, std::vector<std::size_t> stride,
                                 std::vector<std::size_t> padding) {
  LayerDescriptor l;
  l.id = std::move(id);
  l.stage = std::move(stage);
  l.kind = LayerKind::conv;
  l.in = in;
  l.out = out;
  l.kernel = std::move(kernel);
  l.stride = stride.empty() ? std::vector<std::size_t>(l.kernel.size(), 1) : std::move(stride);
  l.padding = padding.empty() ? std::vector<std::size_t>(l.kernel.size(), 0) : std::move(padding);
  return l;
}

inline LayerDescriptor prim_simple(LayerKind kind, std::string id, std::string stage,
                                   std::size_t channels) {
  LayerDescriptor l;
  l.id = std::move(id);
  l.stage = std::move(stage);
  l.kind = kind;
  l.in = channels;
  l.out = channels;
  return l;
}

inline std::string block_id(const std::string& stage, std::size_t i, const char* part) {
  std::ostringstream os;
  os << stage << ".b" << std::setw(2) << std::setfill('0') << i << '.' << part;
  return os.str();
}

}  // namespace detail

/// Expands stage macros into the flat layer list used for counting.
inline std::vector<LayerDescriptor> expand_arch(const ArchDescriptor& arch) {
  std::vector<LayerDescriptor> out;
  std::size_t anon = 0;
  auto next_id = [&](const std::string& given, const char* kind) {
    if (!given.empty()) return given;
    return std::string(kind) + "_" + std::to_string(anon++);
  };
  for (const auto& e : arch.entries) {
    if (e.kind == "conv") {
      out.push_back(detail::prim_conv(next_id(e.id, "conv"), e.stage, e.in, e.out, e.kernel,
                                      e.stride, e.padding));
    } else if (e.kind == "norm") {
      out.push_back(detail::prim_simple(LayerKind::norm, next_id(e.id, "norm"), e.stage, e.channels));
    } else if (e.kind == "act") {
      out.push_back(detail::prim_simple(LayerKind::act, next_id(e.id, "act"), e.stage, e.channels));
    } else if (e.kind == "pool") {
      LayerDescriptor l = detail::prim_conv(next_id(e.id, "pool"), e.stage, e.channels, e.channels,
                                            e.kernel, e.stride, e.padding);
      l.kind = LayerKind::pool;
      l.pool = e.pool == "max" ? PoolKind::max : PoolKind::avg;
      out.push_back(l);
    } else if (e.kind == "global_pool") {
      out.push_back(detail::prim_simple(LayerKind::global_pool, next_id(e.id, "gap"), e.stage, 0));
    } else if (e.kind == "linear") {
      LayerDescriptor l;
      l.id = next_id(e.id, "linear");
      l.stage = e.stage;
      l.kind = LayerKind::linear;
      l.in = e.in;
      l.out = e.out;
      l.bias = e.bias;
      out.push_back(l);
    } else if (e.kind == "plain_stage") {
      const std::string stage = e.id;
      std::size_t in = e.in;
      for (std::size_t b = 0; b < e.blocks; ++b) {
        const std::size_t s = b == 0 ? e.stage_stride : 1;
        out.push_back(detail::prim_conv(detail::block_id(stage, b, "conv1"), stage, in, e.out,
                                        {3, 3}, {s, s}, {1, 1}));
        out.push_back(detail::prim_simple(LayerKind::norm, detail::block_id(stage, b, "bn1"), stage, e.out));
        out.push_back(detail::prim_simple(LayerKind::act, detail::block_id(stage, b, "relu1"), stage, e.out));
        out.push_back(detail::prim_conv(detail::block_id(stage, b, "conv2"), stage, e.out, e.out,
                                        {3, 3}, {1, 1}, {1, 1}));
        out.push_back(detail::prim_simple(LayerKind::norm, detail::block_id(stage, b, "bn2"), stage, e.out));
        // Identity shortcut (zero-padded on the downsampling block): no parameters.
        out.push_back(detail::prim_simple(LayerKind::residual_add, detail::block_id(stage, b, "add"), stage, e.out));
        out.push_back(detail::prim_simple(LayerKind::act, detail::block_id(stage, b, "relu2"), stage, e.out));
        in = e.out;
      }
    } else if (e.kind == "bottleneck_stage") {
      const std::string stage = e.id;
      std::size_t in = e.in;
      for (std::size_t b = 0; b < e.blocks; ++b) {
        const std::size_t s = b == 0 ? e.stage_stride : 1;
        out.push_back(detail::prim_conv(detail::block_id(stage, b, "conv1"), stage, in, e.width,
                                        {1, 1}, {1, 1}, {0, 0}));
        out.push_back(detail::prim_simple(LayerKind::norm, detail::block_id(stage, b, "bn1"), stage, e.width));
        out.push_back(detail::prim_simple(LayerKind::act, detail::block_id(stage, b, "relu1"), stage, e.width));
        out.push_back(detail::prim_conv(detail::block_id(stage, b, "conv2"), stage, e.width, e.width,
                                        {3, 3}, {s, s}, {1, 1}));
        out.push_back(detail::prim_simple(LayerKind::norm, detail::block_id(stage, b, "bn2"), stage, e.width));
        out.push_back(detail::prim_simple(LayerKind::act, detail::block_id(stage, b, "relu2"), stage, e.width));
        out.push_back(detail::prim_conv(detail::block_id(stage, b, "conv3"), stage, e.width, e.out,
                                        {1, 1}, {1, 1}, {0, 0}));
        out.push_back(detail::prim_simple(LayerKind::norm, detail::block_id(stage, b, "bn3"), stage, e.out));
        if (b == 0 && (in != e.out || s != 1)) {
          LayerDescriptor ds = detail::prim_conv(detail::block_id(stage, b, "downsample"), stage,
                                                 in, e.out, {1, 1}, {s, s}, {0, 0});
          ds.parallel = true;  // emitted after the main path, at block-output extents
          out.push_back(ds);
          out.push_back(detail::prim_simple(LayerKind::norm, detail::block_id(stage, b, "bn_ds"), stage, e.out));
        }
        out.push_back(detail::prim_simple(LayerKind::residual_add, detail::block_id(stage, b, "add"), stage, e.out));
        out.push_back(detail::prim_simple(LayerKind::act, detail::block_id(stage, b, "relu3"), stage, e.out));
        in = e.out;
      }
    } else {
      throw std::invalid_argument("descriptor " + arch.name + ": unknown layer kind '" + e.kind + "'");
    }
  }
  return out;
}

/// Marks eligible convolutions (spatial size > 1) as gated per the plan.
inline std::vector<LayerDescriptor> expand_arch(const ArchDescriptor& arch, const GatingPlan& plan) {
  std::vector<LayerDescriptor> layers = expand_arch(arch);
  if (plan.enabled && plan.stages) {
    std::set<std::string> known;
    for (const auto& l : layers) known.insert(l.stage);
    for (const auto& s : *plan.stages)
      if (!known.count(s))
        throw std::invalid_argument("stage '" + s + "' not present in architecture " + arch.name);
  }
  for (auto& l : layers) {
    if (l.kind != LayerKind::conv || l.kernel_size() <= 1) continue;
    if (!plan.covers(l.stage)) continue;
    l.gated = true;
    l.cgc = cgc_config_for_conv(l, plan.variant);
    l.cgc.validate();
  }
  return layers;
}

/// CGC enabled only on convolutions within the named stages.
inline std::vector<LayerDescriptor> stage_filter(const ArchDescriptor& arch,
                                                 const std::set<std::string>& stages,
                                                 const std::string& variant = "default") {
  GatingPlan plan;
  plan.enabled = !stages.empty();
  plan.stages = stages;
  plan.variant = variant;
  return expand_arch(arch, plan);
}

// ---------------------------------------------------------------------------
// Counting.
// ---------------------------------------------------------------------------

/// Gate-generation MACs for the channel-interacting map. `latent` applies the
/// grouped linear once per latent position (d*c*o/g); `paper` is the
/// published approximation without the latent factor (c*o/g). The latent
/// convention is pinned against the published overhead figure by a one-time
/// calibration test; `paper` stays available behind a report flag.
enum class InteractMacs { latent, paper };

struct CgcOverhead {
  std::int64_t pool = 0;
  std::int64_t encode = 0;
  std::int64_t interact = 0;
  std::int64_t decode = 0;
  std::int64_t gate_mul = 0;

  // The paper-comparable overhead figure: gate generation plus pooling. The
  // per-sample kernel multiply is reported separately so conv-style totals
  // stay comparable across gated and ungated layers.
  std::int64_t comparable() const { return pool + encode + interact + decode; }
  std::int64_t total() const { return comparable() + gate_mul; }

  CgcOverhead& operator+=(const CgcOverhead& o) {
    pool += o.pool;
    encode += o.encode;
    interact += o.interact;
    decode += o.decode;
    gate_mul += o.gate_mul;
    return *this;
  }
};

struct LayerCost {
  std::string id;
  std::string stage;
  std::string kind;
  std::int64_t params = 0;
  std::int64_t core_macs = 0;  // convolution / linear multiply-accumulates
  std::int64_t aux_macs = 0;   // norm, activation, pooling, residual adds
  CgcOverhead cgc;
  bool gated = false;
};

struct CostReport {
  std::string arch;
  std::vector<LayerCost> layers;
  std::int64_t total_params = 0;
  std::int64_t total_core_macs = 0;
  std::int64_t total_aux_macs = 0;
  CgcOverhead total_cgc;

  void finalize() {
    total_params = 0;
    total_core_macs = 0;
    total_aux_macs = 0;
    total_cgc = CgcOverhead{};
    for (const auto& l : layers) {
      total_params += l.params;
      total_core_macs += l.core_macs;
      total_aux_macs += l.aux_macs;
      total_cgc += l.cgc;
    }
  }
};

/// Learnable parameter count of one context-gating block, mirroring exactly
/// the tensors make_cgc_params allocates.
inline std::int64_t cgc_extra_params(const CgcConfig& cfg) {
  const std::int64_t c = static_cast<std::int64_t>(cfg.in_channels);
  const std::int64_t o = static_cast<std::int64_t>(cfg.out_channels);
  const std::int64_t d = static_cast<std::int64_t>(cfg.latent_or_default());
  const std::int64_t s = static_cast<std::int64_t>(cfg.kernel_size());
  const std::int64_t m = static_cast<std::int64_t>(shape_numel(cfg.pooled_or_default()));
  const std::int64_t g = static_cast<std::int64_t>(cfg.groups_or_default());
  std::int64_t p = 0;
  p += m * d;                        // E
  if (cfg.has_E2()) p += m * d;      // E2
  if (cfg.has_interact()) p += (c / g) * (o / g);  // I
  if (cfg.has_D_c()) p += d * s;
  if (cfg.has_D_o()) p += d * s;
  if (cfg.has_norm_c1()) p += 2 * c;
  if (cfg.has_norm_c2() || cfg.has_norm_c2_solo()) p += 2 * c;
  if (cfg.has_interact()) p += 2 * o;  // norm_o
  return p;
}

/// The gate-generator weights alone (E, I, D), i.e. the terms of the
/// O(d*h'*w' + c*o/g^2 + d*k1*k2) parameter overhead; norm affines excluded.
inline std::int64_t cgc_generator_params(const CgcConfig& cfg) {
  const std::int64_t c = static_cast<std::int64_t>(cfg.in_channels);
  const std::int64_t o = static_cast<std::int64_t>(cfg.out_channels);
  const std::int64_t d = static_cast<std::int64_t>(cfg.latent_or_default());
  const std::int64_t s = static_cast<std::int64_t>(cfg.kernel_size());
  const std::int64_t m = static_cast<std::int64_t>(shape_numel(cfg.pooled_or_default()));
  const std::int64_t g = static_cast<std::int64_t>(cfg.groups_or_default());
  std::int64_t p = m * d * (cfg.has_E2() ? 2 : 1);
  if (cfg.has_interact()) p += (c / g) * (o / g);
  if (cfg.has_D_c()) p += d * s;
  if (cfg.has_D_o()) p += d * s;
  return p;
}

inline CgcOverhead cgc_overhead_macs(const CgcConfig& cfg, std::size_t h, std::size_t w,
                                     InteractMacs convention) {
  const std::int64_t c = static_cast<std::int64_t>(cfg.in_channels);
  const std::int64_t o = static_cast<std::int64_t>(cfg.out_channels);
  const std::int64_t d = static_cast<std::int64_t>(cfg.latent_or_default());
  const std::int64_t s = static_cast<std::int64_t>(cfg.kernel_size());
  const std::int64_t m = static_cast<std::int64_t>(shape_numel(cfg.pooled_or_default()));
  const std::int64_t g = static_cast<std::int64_t>(cfg.groups_or_default());
  CgcOverhead oh;
  oh.pool = c * static_cast<std::int64_t>(h) * static_cast<std::int64_t>(w) + c * m;
  oh.encode = c * m * d * (cfg.has_E2() ? 2 : 1);
  if (cfg.has_interact())
    oh.interact = convention == InteractMacs::latent ? d * c * o / g : c * o / g;
  if (cfg.needs_g1()) oh.decode += c * d * s;
  if (cfg.needs_g2()) oh.decode += o * d * s;
  oh.gate_mul = o * c * s;
  return oh;
}

struct CountOptions {
  InteractMacs interact = InteractMacs::latent;
};

/// Walks the expanded layer list, tracking spatial extents, and produces the
/// full cost report. Shape-chain violations raise errors naming the layer.
inline CostReport count_costs(const std::string& arch_name,
                              const std::vector<LayerDescriptor>& layers, const Shape& input_shape,
                              const CountOptions& opt = {}) {
  if (input_shape.size() != 3)
    throw std::invalid_argument("count: input shape must be (c,h,w)");
  CostReport report;
  report.arch = arch_name;
  std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  bool pooled_to_vector = false;

  for (const auto& l : layers) {
    LayerCost cost;
    cost.id = l.id;
    cost.stage = l.stage;
    cost.kind = l.gated ? "cgc_conv" : layer_kind_name(l.kind);
    cost.gated = l.gated;
    const std::int64_t elems = static_cast<std::int64_t>(c * h * w);
    switch (l.kind) {
      case LayerKind::conv: {
        if (l.parallel) {
          // Shortcut projection: spatial extents already match the block
          // output, the main chain continues unchanged.
          const std::size_t k1 = l.kernel[0], k2 = l.kernel.size() > 1 ? l.kernel[1] : 1;
          cost.params = static_cast<std::int64_t>(l.out * (l.in / l.groups) * k1 * k2) +
                        (l.bias ? static_cast<std::int64_t>(l.out) : 0);
          cost.core_macs = static_cast<std::int64_t>(l.out * (l.in / l.groups) * k1 * k2) *
                           static_cast<std::int64_t>(h * w);
          break;
        }
        if (l.in != c)
          throw std::invalid_argument("count: chain broken at '" + l.id + "': expects " +
                                      std::to_string(l.in) + " channels, gets " + std::to_string(c));
        const std::size_t k1 = l.kernel[0], k2 = l.kernel.size() > 1 ? l.kernel[1] : 1;
        const std::size_t oh2 = conv_out_extent(h, k1, l.stride[0], l.padding[0]);
        const std::size_t ow2 = l.kernel.size() > 1
                                    ? conv_out_extent(w, k2, l.stride[1], l.padding[1])
                                    : w;
        cost.params = static_cast<std::int64_t>(l.out * (l.in / l.groups) * k1 * k2) +
                      (l.bias ? static_cast<std::int64_t>(l.out) : 0);
        cost.core_macs = static_cast<std::int64_t>(l.out * (l.in / l.groups) * k1 * k2) *
                         static_cast<std::int64_t>(oh2 * ow2);
        if (l.gated) {
          cost.params += cgc_extra_params(l.cgc);
          cost.cgc = cgc_overhead_macs(l.cgc, h, w, opt.interact);
          const std::int64_t d = static_cast<std::int64_t>(l.cgc.latent_or_default());
          const std::int64_t cd = static_cast<std::int64_t>(l.in) * d;
          const std::int64_t od = static_cast<std::int64_t>(l.out) * d;
          std::int64_t module_aux = 0;
          if (l.cgc.has_norm_c1()) module_aux += 3 * cd;
          if (l.cgc.has_norm_c2() || l.cgc.has_norm_c2_solo()) module_aux += 3 * cd;
          if (l.cgc.has_interact()) module_aux += 3 * od;
          module_aux += 2 * static_cast<std::int64_t>(l.out * l.in) *
                        static_cast<std::int64_t>(l.cgc.kernel_size());  // combine + sigmoid
          cost.aux_macs += module_aux;
        }
        c = l.out;
        h = oh2;
        w = ow2;
        break;
      }
      case LayerKind::linear: {
        const std::size_t feat = pooled_to_vector ? c : c * h * w;
        if (l.in != feat)
          throw std::invalid_argument("count: chain broken at '" + l.id + "': expects " +
                                      std::to_string(l.in) + " features, gets " + std::to_string(feat));
        cost.params = static_cast<std::int64_t>(l.in * l.out) + (l.bias ? static_cast<std::int64_t>(l.out) : 0);
        cost.core_macs = static_cast<std::int64_t>(l.in * l.out);
        c = l.out;
        h = w = 1;
        pooled_to_vector = true;
        break;
      }
      case LayerKind::norm:
        if (l.in && l.in != c)
          throw std::invalid_argument("count: chain broken at '" + l.id + "': norm over " +
                                      std::to_string(l.in) + " channels, gets " + std::to_string(c));
        cost.params = 2 * static_cast<std::int64_t>(c);
        cost.aux_macs = 2 * elems;
        break;
      case LayerKind::act:
        cost.aux_macs = elems;
        break;
      case LayerKind::pool: {
        const std::size_t k1 = l.kernel[0], k2 = l.kernel.size() > 1 ? l.kernel[1] : 1;
        const std::size_t oh2 = conv_out_extent(h, k1, l.stride[0], l.padding[0]);
        const std::size_t ow2 = l.kernel.size() > 1
                                    ? conv_out_extent(w, k2, l.stride[1], l.padding[1])
                                    : w;
        cost.aux_macs = static_cast<std::int64_t>(c * oh2 * ow2) *
                            static_cast<std::int64_t>(k1 * k2) +
                        static_cast<std::int64_t>(c * oh2 * ow2);
        h = oh2;
        w = ow2;
        break;
      }
      case LayerKind::global_pool:
        cost.aux_macs = elems + static_cast<std::int64_t>(c);
        h = w = 1;
        pooled_to_vector = true;
        break;
      case LayerKind::residual_add:
        cost.aux_macs = elems;
        break;
    }
    report.layers.push_back(std::move(cost));
  }
  report.finalize();
  return report;
}

inline CostReport count_costs(const ArchDescriptor& arch, const GatingPlan& plan = {},
                              const CountOptions& opt = {}) {
  return count_costs(arch.name, expand_arch(arch, plan), arch.input_shape, opt);
}

/// Parameter cost of generating a gate directly from a length-l context
/// vector: the full-tensor form, or the (o+c)-decomposed form.
inline std::int64_t naive_gate_params(std::size_t l, const LayerDescriptor& layer, bool decomposed) {
  if (l < 1) throw std::invalid_argument("naive_gate_params: l must be >= 1");
  const std::int64_t lc = static_cast<std::int64_t>(l);
  const std::int64_t o = static_cast<std::int64_t>(layer.out);
  const std::int64_t c = static_cast<std::int64_t>(layer.in);
  const std::int64_t s = static_cast<std::int64_t>(layer.kernel_size());
  return decomposed ? lc * (o + c) * s : lc * o * c * s;
}

// ---------------------------------------------------------------------------
// Report rendering.
// ---------------------------------------------------------------------------

inline std::string format_report(const CostReport& r, bool per_layer = false) {
  std::ostringstream os;
  os << "arch: " << r.arch << '\n';
  if (per_layer) {
    os << std::left << std::setw(24) << "layer" << std::setw(10) << "kind" << std::right
       << std::setw(12) << "params" << std::setw(16) << "macs" << std::setw(14) << "cgc_overhead"
       << '\n';
    for (const auto& l : r.layers) {
      if (l.params == 0 && l.core_macs == 0 && l.cgc.total() == 0) continue;
      os << std::left << std::setw(24) << l.id << std::setw(10) << l.kind << std::right
         << std::setw(12) << l.params << std::setw(16) << l.core_macs << std::setw(14)
         << l.cgc.comparable() << '\n';
    }
  }
  os << "total params:        " << r.total_params << "  (" << std::fixed << std::setprecision(2)
     << static_cast<double>(r.total_params) / 1e6 << "M)\n";
  os << "conv+linear MACs:    " << r.total_core_macs << "  (" << std::setprecision(3)
     << static_cast<double>(r.total_core_macs) / 1e6 << " MFLOPs)\n";
  os << "norm/act/pool MACs:  " << r.total_aux_macs << '\n';
  if (r.total_cgc.total() > 0) {
    os << "cgc overhead MACs:   " << r.total_cgc.comparable() << "  (" << std::setprecision(3)
       << static_cast<double>(r.total_cgc.comparable()) / 1e6 << " MFLOPs)\n";
    os << "  pool:              " << r.total_cgc.pool << '\n';
    os << "  encode (E):        " << r.total_cgc.encode << '\n';
    os << "  interact (I):      " << r.total_cgc.interact << '\n';
    os << "  decode (D):        " << r.total_cgc.decode << '\n';
    os << "  gate multiply:     " << r.total_cgc.gate_mul << "  (reported separately)\n";
  }
  return os.str();
}

inline std::string format_report_csv(const CostReport& r) {
  std::ostringstream os;
  os << "layer,stage,kind,params,core_macs,aux_macs,cgc_pool,cgc_encode,cgc_interact,cgc_decode,cgc_gate_mul\n";
  for (const auto& l : r.layers)
    os << l.id << ',' << l.stage << ',' << l.kind << ',' << l.params << ',' << l.core_macs << ','
       << l.aux_macs << ',' << l.cgc.pool << ',' << l.cgc.encode << ',' << l.cgc.interact << ','
       << l.cgc.decode << ',' << l.cgc.gate_mul << '\n';
  os << "total,," << ',' << r.total_params << ',' << r.total_core_macs << ',' << r.total_aux_macs
     << ',' << r.total_cgc.pool << ',' << r.total_cgc.encode << ',' << r.total_cgc.interact << ','
     << r.total_cgc.decode << ',' << r.total_cgc.gate_mul << '\n';
  return os.str();
}

}  // namespace cgc
