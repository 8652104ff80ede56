#include "svl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "svl/error.hpp"

namespace svl {

const char* to_string(EncoderVariant v) {
  return v == EncoderVariant::pointnet ? "pointnet" : "pointformer";
}

EncoderVariant encoder_variant_from(const std::string& name) {
  if (name == "pointnet") return EncoderVariant::pointnet;
  if (name == "pointformer") return EncoderVariant::pointformer;
  throw Error(err::kConfig, "unknown encoder variant '" + name + "'");
}

void EncoderConfig::validate() const {
  neuron.validate();
  if (dims.empty()) throw Error(err::kConfig, "encoder dims must not be empty");
  for (std::size_t d : dims)
    if (d == 0) throw Error(err::kConfig, "encoder dims must be positive");
  if (embed_dim == 0) throw Error(err::kConfig, "embed_dim must be positive");
  if (timesteps == 0) throw Error(err::kConfig, "timesteps must be positive");
  if (variant == EncoderVariant::pointformer) {
    if (n_centers == 0 || k == 0) throw Error(err::kConfig, "n_centers and k must be positive");
    if (heads == 0 || width() % heads != 0)
      throw Error(err::kConfig, "heads must divide the transformer width");
  }
}

std::size_t EncoderConfig::input_dim() const {
  // Pointformer groups carry center-relative xyz plus the center's own xyz.
  return (variant == EncoderVariant::pointformer ? 6 : 3) + in_features;
}

const Tensor& EncoderParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw Error(err::kShape, "missing encoder parameter '" + name + "'");
  return it->second;
}

std::vector<std::pair<std::string, Shape>> encoder_layout(const EncoderConfig& cfg) {
  std::vector<std::pair<std::string, Shape>> layout;
  std::size_t in = cfg.input_dim();
  for (std::size_t i = 0; i < cfg.dims.size(); ++i) {
    const std::string p = "mlp" + std::to_string(i);
    layout.push_back({p + ".w", {in, cfg.dims[i]}});
    layout.push_back({p + ".b", {cfg.dims[i]}});
    in = cfg.dims[i];
  }
  if (cfg.variant == EncoderVariant::pointformer) {
    const std::size_t d = cfg.width();
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      const std::string p = "sdt" + std::to_string(l);
      for (const char* m : {".q.w", ".k.w", ".v.w", ".o.w"}) layout.push_back({p + m, {d, d}});
    }
  }
  layout.push_back({"proj.w", {cfg.width(), cfg.embed_dim}});
  layout.push_back({"proj.b", {cfg.embed_dim}});
  return layout;
}

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  EncoderParams params;
  for (const auto& [name, shape] : encoder_layout(cfg)) {
    std::vector<double> v(shape_size(shape), 0.0);
    if (shape.size() == 2) {
      const double fan_in = static_cast<double>(shape[0]);
      // The coding layer sees analog coordinates in roughly [-1, 1] and needs
      // a larger gain to push membranes past the first rounding step.
      double gain = name == "mlp0.w" ? 2.0 : 1.0;
      if (name.ends_with(".q.w") || name.ends_with(".k.w")) gain = 0.5;
      std::normal_distribution<double> dist(0.0, gain / std::sqrt(fan_in));
      for (double& x : v) x = dist(rng);
    }
    params.tensors.emplace(name, Tensor(shape, std::move(v)));
  }
  return params;
}

void check_params(const EncoderParams& params, const EncoderConfig& cfg) {
  for (const auto& [name, shape] : encoder_layout(cfg)) {
    const Tensor& t = params.at(name);
    if (t.shape() != shape)
      throw Error(err::kShape, "parameter " + name + " has shape " + shape_str(t.shape()) +
                                   ", config expects " + shape_str(shape));
  }
}

EncoderParams trainable(const EncoderParams& params) {
  EncoderParams out;
  for (const auto& [name, t] : params.tensors) out.tensors.emplace(name, Tensor(t.shape(), t.values(), true));
  return out;
}

namespace {

// One forward pass: owns the per-site membrane states and energy bookkeeping.
class Pass {
 public:
  Pass(const EncoderParams& params, const EncoderConfig& cfg, const ForwardOptions& opts)
      : params_(params), cfg_(cfg), opts_(opts), d_(cfg.neuron.max_spike()) {}

  const Tensor& param(const std::string& name) const { return params_.at(name); }
  int d() const { return d_; }
  double gap() const { return gap_; }

  Tensor spike(const std::string& site, const Tensor& current) {
    auto it = states_.find(site);
    if (it == states_.end())
      it = states_.emplace(site, NeuronState::zeros(current.shape())).first;
    auto step = lif_step(it->second, current, cfg_.neuron);
    it->second = std::move(step.state);
    if (!is_spike_tensor(step.spikes, d_))
      throw Error(err::kNumeric, "non-integer activation on spike path at " + site);
    return std::move(step.spikes);
  }

  // Analog input times weights: the multiply-accumulate coding layer.
  Tensor analog_linear(const std::string& layer, const Tensor& x) {
    const Tensor& w = param(layer + ".w");
    if (x.dim(1) != w.dim(0))
      throw Error(err::kShape, "input width " + std::to_string(x.dim(1)) + " does not match " +
                                   layer + " " + shape_str(w.shape()));
    if (opts_.recorder)
      opts_.recorder->record(layer, LayerKind::encode_mac,
                             static_cast<double>(x.dim(0) * w.dim(0) * w.dim(1)));
    return add_row_bias(matmul(x, w), param(layer + ".b"));
  }

  // Spike counts in [0, stream_max] times w. stream_max exceeds D on the
  // residual stream, which is a sum of several spike tensors.
  Tensor spike_matmul(const std::string& layer, const Tensor& s, const Tensor& w,
                      int stream_max) {
    const std::size_t rows = s.dim(0), in = s.dim(1), out = w.dim(1);
    if (in != w.dim(0))
      throw Error(err::kShape, layer + ": spike width " + std::to_string(in) +
                                   " does not match " + shape_str(w.shape()));
    if (opts_.recorder) {
      // Each unit of a residual sum is its own accumulate, hence the scaling.
      const double scale = static_cast<double>(stream_max) / d_;
      opts_.recorder->record(layer, LayerKind::spike_ac,
                             static_cast<double>(rows * in * out) * scale,
                             firing_rate(s, stream_max));
    }
    Tensor dense = matmul(s, w);
    if (opts_.path == SpikePath::integer) return dense;

    // Binary sub-step k carries a 1 wherever the count exceeds k; each set
    // bit adds one weight row. No multiplications.
    std::vector<double> acc(rows * out, 0.0);
    for (int k = 0; k < stream_max; ++k)
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < in; ++i) {
          if (s[r * in + i] <= k) continue;
          const double* wr = w.data().data() + i * out;
          double* ar = acc.data() + r * out;
          for (std::size_t j = 0; j < out; ++j) ar[j] += wr[j];
        }
    for (std::size_t i = 0; i < acc.size(); ++i) gap_ = std::max(gap_, std::abs(acc[i] - dense[i]));
    return Tensor(dense.shape(), std::move(acc));
  }

  Tensor spike_linear(const std::string& layer, const Tensor& s, int stream_max, bool bias) {
    Tensor y = spike_matmul(layer, s, param(layer + ".w"), stream_max);
    return bias ? add_row_bias(y, param(layer + ".b")) : y;
  }

  // Shared MLP over the rows of x: analog coding layer, then spiking layers.
  Tensor mlp(const Tensor& x) {
    Tensor s = spike("mlp0", analog_linear("mlp0", x));
    for (std::size_t i = 1; i < cfg_.dims.size(); ++i) {
      const std::string layer = "mlp" + std::to_string(i);
      s = spike(layer, spike_linear(layer, s, d_, true));
    }
    return s;
  }

  Tensor project(const Tensor& pooled) {
    return reshape(spike_linear("proj", pooled, d_, true), {cfg_.embed_dim});
  }

 private:
  const EncoderParams& params_;
  const EncoderConfig& cfg_;
  const ForwardOptions& opts_;
  int d_;
  double gap_ = 0.0;
  std::map<std::string, NeuronState> states_;
};

Tensor point_matrix(const PointCloud& cloud, const EncoderConfig& cfg) {
  if (cloud.feature_dim() != cfg.in_features)
    throw Error(err::kShape, "cloud has " + std::to_string(cloud.feature_dim()) +
                                 " feature channels, encoder expects " +
                                 std::to_string(cfg.in_features));
  const std::size_t n = cloud.size(), in = cfg.input_dim();
  std::vector<double> x;
  x.reserve(n * in);
  for (std::size_t i = 0; i < n; ++i) {
    for (double c : cloud.point(i)) x.push_back(c);
    for (std::size_t f = 0; f < cfg.in_features; ++f)
      x.push_back(cloud.features()[i * cfg.in_features + f]);
  }
  return Tensor({n, in}, std::move(x));
}

Tensor group_matrix(const PointCloud& cloud, const PointGroups& g, const EncoderConfig& cfg) {
  if (cloud.feature_dim() != cfg.in_features)
    throw Error(err::kShape, "cloud has " + std::to_string(cloud.feature_dim()) +
                                 " feature channels, encoder expects " +
                                 std::to_string(cfg.in_features));
  const std::size_t in = cfg.input_dim();
  std::vector<double> x;
  x.reserve(g.n_centers * g.k * in);
  for (std::size_t c = 0; c < g.n_centers; ++c) {
    const Point3& center = cloud.point(g.centers[c]);
    for (std::size_t j = 0; j < g.k; ++j) {
      const std::size_t slot = c * g.k + j;
      for (int ax = 0; ax < 3; ++ax) x.push_back(g.relative[slot * 3 + ax]);
      for (double v : center) x.push_back(v);
      const std::size_t idx = g.neighbors[slot];
      for (std::size_t f = 0; f < cfg.in_features; ++f)
        x.push_back(cloud.features()[idx * cfg.in_features + f]);
    }
  }
  return Tensor({g.n_centers * g.k, in}, std::move(x));
}

EncoderOutput finish(std::vector<Tensor>& pooled, std::vector<Tensor>& trains, const Pass& pass) {
  return EncoderOutput{SpikeFeature(stack(pooled), pass.d()), stack(trains), pass.gap()};
}

}  // namespace

EncoderOutput spike_pointnet_forward(const PointCloud& cloud, const EncoderParams& params,
                                     const EncoderConfig& cfg, const ForwardOptions& opts) {
  if (cfg.variant != EncoderVariant::pointnet)
    throw Error(err::kConfig, "spike_pointnet_forward needs the pointnet variant");
  check_params(params, cfg);
  Pass pass(params, cfg, opts);
  const Tensor x = point_matrix(cloud, cfg);
  std::vector<Tensor> pooled, trains;
  for (std::size_t t = 0; t < cfg.timesteps; ++t) {
    Tensor s = pass.mlp(x);
    // Max over points keeps integer counts and makes the output order-free.
    Tensor p = reshape(max(s, 0), {1, cfg.width()});
    trains.push_back(pass.project(p));
    pooled.push_back(reshape(p, {cfg.width()}));
  }
  return finish(pooled, trains, pass);
}

EncoderOutput spike_pointformer_forward(const PointCloud& cloud, const EncoderParams& params,
                                        const EncoderConfig& cfg, const ForwardOptions& opts) {
  if (cfg.variant != EncoderVariant::pointformer)
    throw Error(err::kConfig, "spike_pointformer_forward needs the pointformer variant");
  if (cfg.n_centers > cloud.size())
    throw Error(err::kRange, "n_centers " + std::to_string(cfg.n_centers) +
                                 " exceeds cloud size " + std::to_string(cloud.size()));
  check_params(params, cfg);
  Pass pass(params, cfg, opts);
  const PointGroups groups = knn_group(cloud, fps(cloud, cfg.n_centers, 0), cfg.k);
  const Tensor x = group_matrix(cloud, groups, cfg);
  const std::size_t tokens = cfg.n_centers, d = cfg.width(), dh = d / cfg.heads;
  const int dmax = pass.d();

  std::vector<Tensor> pooled, trains;
  for (std::size_t t = 0; t < cfg.timesteps; ++t) {
    // Element-wise max over each token's neighbours.
    Tensor f = max(reshape(pass.mlp(x), {tokens, cfg.k, d}), 1);
    int stream_max = dmax;
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      const std::string p = "sdt" + std::to_string(l);
      Tensor q = pass.spike(p + ".q", pass.spike_linear(p + ".q", f, stream_max, false));
      Tensor k = pass.spike(p + ".k", pass.spike_linear(p + ".k", f, stream_max, false));
      Tensor v = pass.spike(p + ".v", pass.spike_linear(p + ".v", f, stream_max, false));
      std::vector<Tensor> heads;
      for (std::size_t h = 0; h < cfg.heads; ++h) {
        const std::string hp = p + ".h" + std::to_string(h);
        Tensor qh = cfg.heads == 1 ? q : slice_cols(q, h * dh, dh);
        Tensor kh = cfg.heads == 1 ? k : slice_cols(k, h * dh, dh);
        Tensor vh = cfg.heads == 1 ? v : slice_cols(v, h * dh, dh);
        // Spiking Q K^T first, then multiply into spiking V; no softmax.
        Tensor scores = pass.spike(hp + ".attn", pass.spike_matmul(hp + ".score", qh, transpose(kh), dmax));
        heads.push_back(pass.spike_matmul(hp + ".value", scores, vh, dmax));
      }
      Tensor attn = cfg.heads == 1 ? heads[0] : concat_cols(heads);
      // attn holds sums of spike products; spike it before the output map so
      // every matmul input on this path stays a spike count.
      Tensor y = pass.spike(p + ".y", attn);
      Tensor z = pass.spike(p + ".o", pass.spike_linear(p + ".o", y, dmax, false));
      f = add(f, z);
      stream_max += dmax;
    }
    Tensor pooled_t = pass.spike("pool", reshape(mean(f, 0), {1, d}));
    trains.push_back(pass.project(pooled_t));
    pooled.push_back(reshape(pooled_t, {d}));
  }
  return finish(pooled, trains, pass);
}

EncoderOutput encode(const PointCloud& cloud, const EncoderParams& params,
                     const EncoderConfig& cfg, const ForwardOptions& opts) {
  return cfg.variant == EncoderVariant::pointnet
             ? spike_pointnet_forward(cloud, params, cfg, opts)
             : spike_pointformer_forward(cloud, params, cfg, opts);
}

Tensor embedding(const EncoderOutput& out) { return mean(out.trains, 0); }

Tensor sda(const Tensor& q, const Tensor& k, const Tensor& v, const NeuronConfig& neuron) {
  if (q.rank() != 2 || k.shape() != q.shape() || v.rank() != 2 || v.dim(0) != q.dim(0))
    throw Error(err::kShape, "sda needs Q, K of shape N x d and V of shape N x d_v, got " +
                                 shape_str(q.shape()) + ", " + shape_str(k.shape()) + ", " +
                                 shape_str(v.shape()));
  auto sn = [&](const Tensor& x) {
    return lif_step(NeuronState::zeros(x.shape()), x, neuron).spikes;
  };
  Tensor scores = sn(matmul(sn(q), transpose(sn(k))));
  return matmul(scores, sn(v));
}

Tensor classify_head(const Tensor& trains, const Tensor& head) {
  if (trains.rank() != 2 || head.rank() != 2 || head.dim(1) != trains.dim(1))
    throw Error(err::kDim, "classify head " + shape_str(head.shape()) +
                               " does not fit features " + shape_str(trains.shape()));
  const Tensor feature = reshape(mean(trains, 0), {trains.dim(1), 1});
  return reshape(matmul(head, feature), {head.dim(0)});
}

Tensor classify_head(const SpikeFeature& f, const Tensor& head) {
  return classify_head(f.values(), head);
}

}  // namespace svl
