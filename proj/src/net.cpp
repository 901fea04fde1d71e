#include "trajpred/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "trajpred/hash.hpp"
#include "trajpred/rng.hpp"

namespace trajpred::net {

namespace {

struct LayerSpec {
  int w_off{0};
  int b_off{0};
  int in{0};
  int out{0};
};

struct Layout {
  LayerSpec ego_enc1, ego_enc2;
  LayerSpec nbr_enc1, nbr_enc2;
  LayerSpec bev_enc1, bev_enc2;
  std::array<std::array<LayerSpec, 3>, 4> ego_head;
  std::array<LayerSpec, 3> nbr_head;
  int total{0};
};

LayerSpec alloc_layer(int& cursor, int in, int out) {
  LayerSpec spec{cursor, cursor + in * out, in, out};
  cursor += in * out + out;
  return spec;
}

Layout make_layout(const NetConfig& cfg) {
  Layout l;
  int cursor = 0;
  l.ego_enc1 = alloc_layer(cursor, cfg.ego_input(), cfg.track_hidden);
  l.ego_enc2 = alloc_layer(cursor, cfg.track_hidden, cfg.track_encoding);
  l.nbr_enc1 = alloc_layer(cursor, cfg.neighbor_input(), cfg.track_hidden);
  l.nbr_enc2 = alloc_layer(cursor, cfg.track_hidden, cfg.track_encoding);
  l.bev_enc1 = alloc_layer(cursor, cfg.bev_input(), cfg.bev_hidden);
  l.bev_enc2 = alloc_layer(cursor, cfg.bev_hidden, cfg.bev_encoding);
  for (auto& head : l.ego_head) {
    head[0] = alloc_layer(cursor, cfg.head_input(), cfg.head_hidden);
    head[1] = alloc_layer(cursor, cfg.head_hidden, cfg.head_hidden);
    head[2] = alloc_layer(cursor, cfg.head_hidden, cfg.head_output());
  }
  l.nbr_head[0] = alloc_layer(cursor, cfg.head_input(), cfg.head_hidden);
  l.nbr_head[1] = alloc_layer(cursor, cfg.head_hidden, cfg.head_hidden);
  l.nbr_head[2] = alloc_layer(cursor, cfg.head_hidden, cfg.head_output());
  l.total = cursor;
  return l;
}

std::vector<LayerSpec> ordered_layers(const Layout& l) {
  std::vector<LayerSpec> out{l.ego_enc1, l.ego_enc2, l.nbr_enc1, l.nbr_enc2, l.bev_enc1, l.bev_enc2};
  for (const auto& head : l.ego_head) out.insert(out.end(), head.begin(), head.end());
  out.insert(out.end(), l.nbr_head.begin(), l.nbr_head.end());
  return out;
}

void linear_forward(const double* p, const LayerSpec& l, const double* x, double* y) {
  for (int o = 0; o < l.out; ++o) {
    const double* row = p + l.w_off + static_cast<size_t>(o) * l.in;
    double acc = p[l.b_off + o];
    for (int i = 0; i < l.in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void tanh_inplace(double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = std::tanh(y[i]);
}

// dW/db accumulate; dx (optional) is overwritten.
void linear_backward(const double* p, const LayerSpec& l, const double* x, const double* dy,
                     double* grad, double* dx) {
  for (int o = 0; o < l.out; ++o) {
    const double g = dy[o];
    grad[l.b_off + o] += g;
    double* grow = grad + l.w_off + static_cast<size_t>(o) * l.in;
    for (int i = 0; i < l.in; ++i) grow[i] += g * x[i];
  }
  if (dx != nullptr) {
    for (int i = 0; i < l.in; ++i) {
      double acc = 0.0;
      for (int o = 0; o < l.out; ++o) acc += p[l.w_off + static_cast<size_t>(o) * l.in + i] * dy[o];
      dx[i] = acc;
    }
  }
}

void tanh_backward(const double* y, double* dy, int n) {
  for (int i = 0; i < n; ++i) dy[i] *= 1.0 - y[i] * y[i];
}

struct EncCache {
  std::vector<double> h1;
  std::vector<double> out;
};

void encoder_forward(const double* p, const LayerSpec& l1, const LayerSpec& l2,
                     std::span<const double> x, EncCache& cache) {
  cache.h1.resize(static_cast<size_t>(l1.out));
  cache.out.resize(static_cast<size_t>(l2.out));
  linear_forward(p, l1, x.data(), cache.h1.data());
  tanh_inplace(cache.h1.data(), l1.out);
  linear_forward(p, l2, cache.h1.data(), cache.out.data());
  tanh_inplace(cache.out.data(), l2.out);
}

void encoder_backward(const double* p, const LayerSpec& l1, const LayerSpec& l2,
                      std::span<const double> x, const EncCache& cache, std::span<double> d_out,
                      double* grad) {
  tanh_backward(cache.out.data(), d_out.data(), l2.out);
  std::vector<double> d_h1(static_cast<size_t>(l1.out));
  linear_backward(p, l2, cache.h1.data(), d_out.data(), grad, d_h1.data());
  tanh_backward(cache.h1.data(), d_h1.data(), l1.out);
  linear_backward(p, l1, x.data(), d_h1.data(), grad, nullptr);
}

struct HeadCache {
  std::vector<double> in;
  std::vector<double> h1;
  std::vector<double> h2;
  std::vector<double> out;
};

void head_forward(const double* p, const std::array<LayerSpec, 3>& layers,
                  std::span<const double> enc_bev, std::span<const double> enc_track,
                  HeadCache& cache) {
  cache.in.resize(enc_bev.size() + enc_track.size());
  std::copy(enc_bev.begin(), enc_bev.end(), cache.in.begin());
  std::copy(enc_track.begin(), enc_track.end(),
            cache.in.begin() + static_cast<long>(enc_bev.size()));
  cache.h1.resize(static_cast<size_t>(layers[0].out));
  cache.h2.resize(static_cast<size_t>(layers[1].out));
  cache.out.resize(static_cast<size_t>(layers[2].out));
  linear_forward(p, layers[0], cache.in.data(), cache.h1.data());
  tanh_inplace(cache.h1.data(), layers[0].out);
  linear_forward(p, layers[1], cache.h1.data(), cache.h2.data());
  tanh_inplace(cache.h2.data(), layers[1].out);
  linear_forward(p, layers[2], cache.h2.data(), cache.out.data());
}

// Final layer is linear; d_out is consumed in place.
void head_backward(const double* p, const std::array<LayerSpec, 3>& layers, const HeadCache& cache,
                   std::span<double> d_out, double* grad, std::span<double> d_in) {
  std::vector<double> d_h2(static_cast<size_t>(layers[1].out));
  std::vector<double> d_h1(static_cast<size_t>(layers[0].out));
  linear_backward(p, layers[2], cache.h2.data(), d_out.data(), grad, d_h2.data());
  tanh_backward(cache.h2.data(), d_h2.data(), layers[1].out);
  linear_backward(p, layers[1], cache.h1.data(), d_h2.data(), grad, d_h1.data());
  tanh_backward(cache.h1.data(), d_h1.data(), layers[0].out);
  linear_backward(p, layers[0], cache.in.data(), d_h1.data(), grad, d_in.data());
}

// Head output layout: [pi logits | coeffs_x | coeffs_y | logsig_x | logsig_y].
int logit_slot(const NetConfig&, int k) { return k; }
int coeff_slot(const NetConfig& cfg, mixture::Axis axis, int k, int d) {
  const int base = axis == mixture::Axis::x ? cfg.K : 5 * cfg.K;
  return base + k * 4 + d;
}
int sigma_slot(const NetConfig& cfg, mixture::Axis axis, int k, int t) {
  const int base = 9 * cfg.K + (axis == mixture::Axis::x ? 0 : cfg.K * cfg.T);
  return base + k * cfg.T + t;
}

mixture::TrajectoryMixture decode_head(const double* raw, const NetConfig& cfg) {
  mixture::TrajectoryMixture m;
  m.K = cfg.K;
  m.T = cfg.T;
  m.dt = cfg.dt;
  m.components.resize(static_cast<size_t>(cfg.K));

  double max_logit = raw[0];
  for (int k = 1; k < cfg.K; ++k) max_logit = std::max(max_logit, raw[logit_slot(cfg, k)]);
  double denom = 0.0;
  for (int k = 0; k < cfg.K; ++k) denom += std::exp(raw[logit_slot(cfg, k)] - max_logit);

  for (int k = 0; k < cfg.K; ++k) {
    auto& comp = m.components[static_cast<size_t>(k)];
    comp.weight = std::exp(raw[logit_slot(cfg, k)] - max_logit) / denom;
    for (int d = 0; d < 4; ++d) {
      comp.coeffs_x.a[static_cast<size_t>(d)] = raw[coeff_slot(cfg, mixture::Axis::x, k, d)];
      comp.coeffs_y.a[static_cast<size_t>(d)] = raw[coeff_slot(cfg, mixture::Axis::y, k, d)];
    }
    comp.sigma_x.resize(static_cast<size_t>(cfg.T));
    comp.sigma_y.resize(static_cast<size_t>(cfg.T));
    for (int t = 0; t < cfg.T; ++t) {
      const double sx = std::clamp(raw[sigma_slot(cfg, mixture::Axis::x, k, t)],
                                   cfg.loss.log_sigma_min, cfg.loss.log_sigma_max);
      const double sy = std::clamp(raw[sigma_slot(cfg, mixture::Axis::y, k, t)],
                                   cfg.loss.log_sigma_min, cfg.loss.log_sigma_max);
      comp.sigma_x[static_cast<size_t>(t)] = std::exp(sx);
      comp.sigma_y[static_cast<size_t>(t)] = std::exp(sy);
    }
  }
  return m;
}

// Map a mixture-level gradient back onto raw head outputs. Saturated
// log-sigma outputs receive zero gradient.
std::vector<double> head_grad_from_mixture(const mixture::MixtureGrad& g, const double* raw,
                                           const NetConfig& cfg) {
  std::vector<double> d_out(static_cast<size_t>(cfg.head_output()), 0.0);
  for (int k = 0; k < cfg.K; ++k) {
    d_out[static_cast<size_t>(logit_slot(cfg, k))] = g.d_logits[static_cast<size_t>(k)];
    for (int d = 0; d < 4; ++d) {
      d_out[static_cast<size_t>(coeff_slot(cfg, mixture::Axis::x, k, d))] =
          g.d_coeffs_x[static_cast<size_t>(k)][static_cast<size_t>(d)];
      d_out[static_cast<size_t>(coeff_slot(cfg, mixture::Axis::y, k, d))] =
          g.d_coeffs_y[static_cast<size_t>(k)][static_cast<size_t>(d)];
    }
    for (int t = 0; t < cfg.T; ++t) {
      const int sx = sigma_slot(cfg, mixture::Axis::x, k, t);
      const int sy = sigma_slot(cfg, mixture::Axis::y, k, t);
      const bool x_live = raw[sx] > cfg.loss.log_sigma_min && raw[sx] < cfg.loss.log_sigma_max;
      const bool y_live = raw[sy] > cfg.loss.log_sigma_min && raw[sy] < cfg.loss.log_sigma_max;
      d_out[static_cast<size_t>(sx)] =
          x_live ? g.d_log_sigma_x[static_cast<size_t>(k * cfg.T + t)] : 0.0;
      d_out[static_cast<size_t>(sy)] =
          y_live ? g.d_log_sigma_y[static_cast<size_t>(k * cfg.T + t)] : 0.0;
    }
  }
  return d_out;
}

int command_index(NavCommand c) { return static_cast<int>(c); }

void check_features(const Features& f, const NetConfig& cfg) {
  if (static_cast<int>(f.ego_in.size()) != cfg.ego_input()) {
    throw std::invalid_argument("net: ego input size mismatch");
  }
  if (static_cast<int>(f.bev_in.size()) != cfg.bev_input()) {
    throw std::invalid_argument("net: bev input size mismatch");
  }
  if (static_cast<int>(f.neighbor_in.size()) > cfg.max_neighbors) {
    throw std::invalid_argument("net: neighbor count " + std::to_string(f.neighbor_in.size()) +
                                " exceeds configured maximum " + std::to_string(cfg.max_neighbors));
  }
  for (const auto& n : f.neighbor_in) {
    if (static_cast<int>(n.size()) != cfg.neighbor_input()) {
      throw std::invalid_argument("net: neighbor input size mismatch");
    }
  }
}

}  // namespace

uint64_t NetConfig::fingerprint() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "K=%d;T=%d;dt=%.17g;P=%d;Q=%d;N=%d;th=%d;te=%d;bh=%d;be=%d;hh=%d;px=%d;py=%d",
                K, T, dt, ego_past_steps, neighbor_past_steps, max_neighbors, track_hidden,
                track_encoding, bev_hidden, bev_encoding, head_hidden, bev_pool_x, bev_pool_y);
  return fnv1a64(buf);
}

int param_count(const NetConfig& cfg) { return make_layout(cfg).total; }

ModelParams init_params(const NetConfig& cfg, uint64_t seed) {
  const Layout layout = make_layout(cfg);
  ModelParams params;
  params.config = cfg;
  params.values.assign(static_cast<size_t>(layout.total), 0.0);
  Rng rng(seed);
  for (const auto& layer : ordered_layers(layout)) {
    const double r = std::sqrt(6.0 / (layer.in + layer.out));
    for (int i = 0; i < layer.in * layer.out; ++i) {
      params.values[static_cast<size_t>(layer.w_off + i)] = rng.uniform(-r, r);
    }
    // biases stay zero: sigma starts at 1 m, weights start uniform
  }
  return params;
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write parameter file " + path.string());
  out.write("PLP1", 4);
  const uint64_t fp = params.config.fingerprint();
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((fp >> (8 * i)) & 0xff);
  out.write(b, 8);
  for (const double v : params.values) {
    uint64_t bits = 0;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
  }
}

ModelParams load_params(const std::filesystem::path& path, const NetConfig& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open parameter file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PLP1", 4) != 0) {
    throw std::runtime_error("parameter file " + path.string() + " is corrupt: bad magic");
  }
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("parameter file " + path.string() + " is corrupt: truncated");
  uint64_t fp = 0;
  for (int i = 0; i < 8; ++i) fp |= static_cast<uint64_t>(b[i]) << (8 * i);
  if (fp != expected.fingerprint()) {
    throw std::runtime_error("parameter file " + path.string() +
                             " fingerprint does not match the configured architecture");
  }

  ModelParams params;
  params.config = expected;
  const int n = param_count(expected);
  params.values.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("parameter file " + path.string() + " is corrupt: truncated");
    uint64_t bits = 0;
    for (int j = 0; j < 8; ++j) bits |= static_cast<uint64_t>(b[j]) << (8 * j);
    std::memcpy(&params.values[static_cast<size_t>(i)], &bits, 8);
  }
  if (in.get() != std::char_traits<char>::eof()) {
    throw std::runtime_error("parameter file " + path.string() + " is corrupt: trailing bytes");
  }
  return params;
}

std::vector<double> ego_track_input(const geometry::Track& past, const NetConfig& cfg) {
  if (static_cast<int>(past.size()) != cfg.ego_past_steps + 1) {
    throw std::invalid_argument("net: ego past must have " + std::to_string(cfg.ego_past_steps + 1) +
                                " samples");
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(cfg.ego_input()));
  for (size_t i = 1; i < past.samples.size(); ++i) {
    out.push_back(past.samples[i].pose.x - past.samples[i - 1].pose.x);
    out.push_back(past.samples[i].pose.y - past.samples[i - 1].pose.y);
  }
  return out;
}

std::vector<double> neighbor_track_input(const geometry::Track& past, const NetConfig& cfg) {
  if (static_cast<int>(past.size()) != cfg.neighbor_past_steps + 1) {
    throw std::invalid_argument("net: neighbor past must have " +
                                std::to_string(cfg.neighbor_past_steps + 1) + " samples");
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(cfg.neighbor_input()));
  for (size_t i = 1; i < past.samples.size(); ++i) {
    out.push_back(past.samples[i].pose.x - past.samples[i - 1].pose.x);
    out.push_back(past.samples[i].pose.y - past.samples[i - 1].pose.y);
  }
  out.push_back(past.samples.back().pose.x);
  out.push_back(past.samples.back().pose.y);
  return out;
}

std::vector<double> bev_input(const bev::BevTensor& tensor, const NetConfig& cfg) {
  if (tensor.frames.size() != static_cast<size_t>(bev::kFrames)) {
    throw std::invalid_argument("net: bev tensor must have 20 frames");
  }
  std::vector<double> out(static_cast<size_t>(cfg.bev_input()), 0.0);
  size_t idx = 0;
  for (int f = 0; f < bev::kFrames; ++f) {
    const auto& frame = tensor.frames[static_cast<size_t>(f)];
    for (int bx = 0; bx < cfg.bev_pool_x; ++bx) {
      const int r0 = bx * bev::kCellsX / cfg.bev_pool_x;
      const int r1 = (bx + 1) * bev::kCellsX / cfg.bev_pool_x;
      for (int by = 0; by < cfg.bev_pool_y; ++by) {
        const int c0 = by * bev::kCellsY / cfg.bev_pool_y;
        const int c1 = (by + 1) * bev::kCellsY / cfg.bev_pool_y;
        double sums[bev::kChannels] = {0, 0, 0, 0, 0};
        for (int ix = r0; ix < r1; ++ix) {
          for (int iy = c0; iy < c1; ++iy) {
            for (int ch = 0; ch < bev::kChannels; ++ch) sums[ch] += frame.at(ix, iy, ch);
          }
        }
        const double inv = 1.0 / ((r1 - r0) * (c1 - c0));
        for (int ch = 0; ch < bev::kChannels; ++ch) out[idx++] = sums[ch] * inv;
      }
    }
  }
  return out;
}

Features extract_features(const data::SceneSample& sample, const NetConfig& cfg) {
  Features f;
  f.sample_id = sample.scenario_id + ":" + std::to_string(sample.frame_index);
  f.command = sample.command;
  f.ego_in = ego_track_input(sample.ego_past, cfg);
  if (static_cast<int>(sample.neighbor_pasts.size()) > cfg.max_neighbors) {
    throw std::invalid_argument("net: sample has " + std::to_string(sample.neighbor_pasts.size()) +
                                " neighbors, maximum is " + std::to_string(cfg.max_neighbors));
  }
  for (const auto& past : sample.neighbor_pasts) {
    f.neighbor_in.push_back(neighbor_track_input(past, cfg));
  }
  f.bev_in = cfg.ablate_bev ? std::vector<double>(static_cast<size_t>(cfg.bev_input()), 0.0)
                            : bev_input(sample.bev, cfg);
  f.ego_past = sample.ego_past;
  f.neighbor_pasts = sample.neighbor_pasts;
  f.neighbor_positions = sample.neighbor_positions;
  f.ego_future = sample.ego_future;
  f.neighbor_futures = sample.neighbor_futures;
  return f;
}

ForwardResult forward(const ModelParams& params, const Features& features) {
  const NetConfig& cfg = params.config;
  check_features(features, cfg);
  const double* p = params.values.data();
  const Layout layout = make_layout(cfg);

  EncCache ego_enc;
  encoder_forward(p, layout.ego_enc1, layout.ego_enc2, features.ego_in, ego_enc);
  EncCache bev_enc;
  encoder_forward(p, layout.bev_enc1, layout.bev_enc2, features.bev_in, bev_enc);

  ForwardResult result;
  for (int c = 0; c < 4; ++c) {
    HeadCache cache;
    head_forward(p, layout.ego_head[static_cast<size_t>(c)], bev_enc.out, ego_enc.out, cache);
    result.ego[static_cast<size_t>(c)] = decode_head(cache.out.data(), cfg);
  }
  if (!cfg.ego_only) {
    for (const auto& nbr_in : features.neighbor_in) {
      EncCache nbr_enc;
      encoder_forward(p, layout.nbr_enc1, layout.nbr_enc2, nbr_in, nbr_enc);
      HeadCache cache;
      head_forward(p, layout.nbr_head, bev_enc.out, nbr_enc.out, cache);
      result.neighbors.push_back(decode_head(cache.out.data(), cfg));
    }
  }
  return result;
}

ForwardResult forward(const ModelParams& params, const data::SceneSample& sample) {
  return forward(params, extract_features(sample, params.config));
}

mixture::TrajectoryMixture forward_ego(const ModelParams& params, const Features& features,
                                       NavCommand command) {
  const NetConfig& cfg = params.config;
  check_features(features, cfg);
  const double* p = params.values.data();
  const Layout layout = make_layout(cfg);
  EncCache ego_enc;
  encoder_forward(p, layout.ego_enc1, layout.ego_enc2, features.ego_in, ego_enc);
  EncCache bev_enc;
  encoder_forward(p, layout.bev_enc1, layout.bev_enc2, features.bev_in, bev_enc);
  HeadCache cache;
  head_forward(p, layout.ego_head[static_cast<size_t>(command_index(command))], bev_enc.out,
               ego_enc.out, cache);
  return decode_head(cache.out.data(), cfg);
}

double sample_loss(const ModelParams& params, const Features& features) {
  const NetConfig& cfg = params.config;
  check_features(features, cfg);
  const double* p = params.values.data();
  const Layout layout = make_layout(cfg);

  EncCache ego_enc;
  encoder_forward(p, layout.ego_enc1, layout.ego_enc2, features.ego_in, ego_enc);
  EncCache bev_enc;
  encoder_forward(p, layout.bev_enc1, layout.bev_enc2, features.bev_in, bev_enc);

  HeadCache ego_head;
  head_forward(p, layout.ego_head[static_cast<size_t>(command_index(features.command))],
               bev_enc.out, ego_enc.out, ego_head);
  const mixture::TrajectoryMixture ego_mix = decode_head(ego_head.out.data(), cfg);

  std::vector<mixture::TrajectoryMixture> nbr_mixes;
  if (!cfg.ego_only) {
    for (const auto& nbr_in : features.neighbor_in) {
      EncCache nbr_enc;
      encoder_forward(p, layout.nbr_enc1, layout.nbr_enc2, nbr_in, nbr_enc);
      HeadCache cache;
      head_forward(p, layout.nbr_head, bev_enc.out, nbr_enc.out, cache);
      nbr_mixes.push_back(decode_head(cache.out.data(), cfg));
    }
  }
  const std::span<const geometry::Track> nbr_gts =
      cfg.ego_only ? std::span<const geometry::Track>{}
                   : std::span<const geometry::Track>(features.neighbor_futures);
  return mixture::nll_loss(&ego_mix, &features.ego_future, nbr_mixes, nbr_gts, cfg.loss);
}

GradResult sample_gradient(const ModelParams& params, const Features& features) {
  const NetConfig& cfg = params.config;
  check_features(features, cfg);
  const double* p = params.values.data();
  const Layout layout = make_layout(cfg);

  EncCache ego_enc;
  encoder_forward(p, layout.ego_enc1, layout.ego_enc2, features.ego_in, ego_enc);
  EncCache bev_enc;
  encoder_forward(p, layout.bev_enc1, layout.bev_enc2, features.bev_in, bev_enc);

  const int c = command_index(features.command);
  HeadCache ego_head;
  head_forward(p, layout.ego_head[static_cast<size_t>(c)], bev_enc.out, ego_enc.out, ego_head);
  const mixture::TrajectoryMixture ego_mix = decode_head(ego_head.out.data(), cfg);

  std::vector<EncCache> nbr_encs;
  std::vector<HeadCache> nbr_heads;
  std::vector<mixture::TrajectoryMixture> nbr_mixes;
  if (!cfg.ego_only) {
    nbr_encs.resize(features.neighbor_in.size());
    nbr_heads.resize(features.neighbor_in.size());
    for (size_t n = 0; n < features.neighbor_in.size(); ++n) {
      encoder_forward(p, layout.nbr_enc1, layout.nbr_enc2, features.neighbor_in[n], nbr_encs[n]);
      head_forward(p, layout.nbr_head, bev_enc.out, nbr_encs[n].out, nbr_heads[n]);
      nbr_mixes.push_back(decode_head(nbr_heads[n].out.data(), cfg));
    }
  }
  const std::span<const geometry::Track> nbr_gts =
      cfg.ego_only ? std::span<const geometry::Track>{}
                   : std::span<const geometry::Track>(features.neighbor_futures);

  const mixture::LossGrad lg =
      mixture::nll_grad(&ego_mix, &features.ego_future, nbr_mixes, nbr_gts, cfg.loss);

  GradResult result;
  result.loss = lg.loss;
  result.grad.assign(params.values.size(), 0.0);
  double* grad = result.grad.data();

  const int enc_bev_dim = cfg.bev_encoding;
  std::vector<double> d_bev_enc(static_cast<size_t>(enc_bev_dim), 0.0);
  std::vector<double> d_in(static_cast<size_t>(cfg.head_input()));

  {  // ego head and encoder
    std::vector<double> d_out = head_grad_from_mixture(lg.ego, ego_head.out.data(), cfg);
    head_backward(p, layout.ego_head[static_cast<size_t>(c)], ego_head, d_out, grad, d_in);
    for (int i = 0; i < enc_bev_dim; ++i) d_bev_enc[static_cast<size_t>(i)] += d_in[static_cast<size_t>(i)];
    std::vector<double> d_track(d_in.begin() + enc_bev_dim, d_in.end());
    encoder_backward(p, layout.ego_enc1, layout.ego_enc2, features.ego_in, ego_enc, d_track, grad);
  }
  for (size_t n = 0; n < nbr_mixes.size(); ++n) {
    std::vector<double> d_out =
        head_grad_from_mixture(lg.neighbors[n], nbr_heads[n].out.data(), cfg);
    head_backward(p, layout.nbr_head, nbr_heads[n], d_out, grad, d_in);
    for (int i = 0; i < enc_bev_dim; ++i) d_bev_enc[static_cast<size_t>(i)] += d_in[static_cast<size_t>(i)];
    std::vector<double> d_track(d_in.begin() + enc_bev_dim, d_in.end());
    encoder_backward(p, layout.nbr_enc1, layout.nbr_enc2, features.neighbor_in[n], nbr_encs[n],
                     d_track, grad);
  }
  encoder_backward(p, layout.bev_enc1, layout.bev_enc2, features.bev_in, bev_enc, d_bev_enc, grad);
  return result;
}

namespace {

GradResult reduce_batch(std::vector<GradResult>& per_sample, std::span<const Features> batch) {
  for (size_t i = 0; i < per_sample.size(); ++i) {
    if (!std::isfinite(per_sample[i].loss)) {
      throw std::runtime_error("non-finite loss at sample " + batch[i].sample_id);
    }
  }
  GradResult total;
  total.grad.assign(per_sample.front().grad.size(), 0.0);
  for (const auto& r : per_sample) {
    total.loss += r.loss;
    for (size_t j = 0; j < total.grad.size(); ++j) total.grad[j] += r.grad[j];
  }
  const double inv = 1.0 / static_cast<double>(per_sample.size());
  total.loss *= inv;
  for (auto& g : total.grad) g *= inv;
  return total;
}

}  // namespace

GradResult batch_gradient(const ModelParams& params, std::span<const Features> batch,
                          bool parallel) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  std::vector<GradResult> per_sample(batch.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long i = 0; i < static_cast<long>(batch.size()); ++i) {
    per_sample[static_cast<size_t>(i)] = sample_gradient(params, batch[static_cast<size_t>(i)]);
  }
  return reduce_batch(per_sample, batch);
}

GradResult batch_gradient_serial(const ModelParams& params, std::span<const Features> batch) {
  if (batch.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  std::vector<GradResult> per_sample(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) per_sample[i] = sample_gradient(params, batch[i]);
  return reduce_batch(per_sample, batch);
}

AdamTrainer::AdamTrainer(ModelParams params, TrainConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.assign(params_.values.size(), 0.0);
  v_.assign(params_.values.size(), 0.0);
}

double AdamTrainer::train_step(std::span<const Features> batch) {
  const GradResult r = batch_gradient(params_, batch, cfg_.parallel);
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t j = 0; j < params_.values.size(); ++j) {
    m_[j] = cfg_.beta1 * m_[j] + (1.0 - cfg_.beta1) * r.grad[j];
    v_[j] = cfg_.beta2 * v_[j] + (1.0 - cfg_.beta2) * r.grad[j] * r.grad[j];
    params_.values[j] -= cfg_.lr * (m_[j] / bc1) / (std::sqrt(v_[j] / bc2) + cfg_.eps);
  }
  return r.loss;
}

}  // namespace trajpred::net
