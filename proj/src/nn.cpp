#include "gradbal/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include "gradbal/errors.hpp"
#include "gradbal/rng.hpp"

namespace gradbal {
namespace {

std::atomic<std::uint64_t> next_tape_id{1};

std::size_t half_width(std::size_t n) { return std::max<std::size_t>(1, n / 2); }

struct BranchShape {
  std::size_t c1, c2, trunk;
};

BranchShape spatial_shape(const ModelConfig& c) {
  return {c.conv1_channels, c.conv2_channels, c.trunk_width};
}

BranchShape spectral_shape(const ModelConfig& c) {
  return {half_width(c.conv1_channels), half_width(c.conv2_channels), half_width(c.trunk_width)};
}

struct BranchParams {
  std::size_t conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
};

BranchParams resolve_branch(const ParamStore& p, const std::string& prefix) {
  return {p.index_of(prefix + ".conv1.w"), p.index_of(prefix + ".conv1.b"),
          p.index_of(prefix + ".conv2.w"), p.index_of(prefix + ".conv2.b"),
          p.index_of(prefix + ".fc.w"),    p.index_of(prefix + ".fc.b")};
}

void check_finite(const Tensor& t, const std::string& layer) {
  if (!t.all_finite()) throw NumericFault(layer, "non-finite activation");
}

// 3x3 convolution, stride 1, zero padding 1.
Tensor conv3x3(const Tensor& in, const Tensor& w, const Tensor& b) {
  const std::size_t batch = in.dim(0), cin = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const std::size_t cout = w.dim(0);
  Tensor out({batch, cout, h, wd});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < cout; ++o) {
      double* dst = &out.values[((n * cout + o) * h) * wd];
      std::fill(dst, dst + h * wd, b[o]);
      for (std::size_t i = 0; i < cin; ++i) {
        const double* src = &in.values[((n * cin + i) * h) * wd];
        const double* k = &w.values[(o * cin + i) * 9];
        for (std::size_t y = 0; y < h; ++y) {
          for (int dy = -1; dy <= 1; ++dy) {
            const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* srow = src + sy * static_cast<std::ptrdiff_t>(wd);
            for (int dx = -1; dx <= 1; ++dx) {
              const double kv = k[(dy + 1) * 3 + (dx + 1)];
              const std::size_t x0 = dx < 0 ? 1 : 0;
              const std::size_t x1 = dx > 0 ? wd - 1 : wd;
              double* drow = dst + y * wd;
              for (std::size_t x = x0; x < x1; ++x) drow[x] += kv * srow[x + dx];
            }
          }
        }
      }
    }
  }
  return out;
}

// Accumulates weight/bias gradients; returns the input gradient when asked.
void conv3x3_backward(const Tensor& in, const Tensor& w, const Tensor& d_out, Tensor& d_w,
                      Tensor& d_b, Tensor* d_in) {
  const std::size_t batch = in.dim(0), cin = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const std::size_t cout = w.dim(0);
  Tensor local_w(w.shape);
  Tensor local_b(d_b.shape);
  if (d_in) *d_in = Tensor(in.shape);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double* g = &d_out.values[((n * cout + o) * h) * wd];
      double bsum = 0.0;
      for (std::size_t j = 0; j < h * wd; ++j) bsum += g[j];
      local_b[o] += bsum;
      for (std::size_t i = 0; i < cin; ++i) {
        const double* src = &in.values[((n * cin + i) * h) * wd];
        const double* k = &w.values[(o * cin + i) * 9];
        double* dk = &local_w.values[(o * cin + i) * 9];
        double* dsrc = d_in ? &d_in->values[((n * cin + i) * h) * wd] : nullptr;
        for (std::size_t y = 0; y < h; ++y) {
          for (int dy = -1; dy <= 1; ++dy) {
            const auto sy = static_cast<std::ptrdiff_t>(y) + dy;
            if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
            const double* srow = src + sy * static_cast<std::ptrdiff_t>(wd);
            const double* grow = g + y * wd;
            for (int dx = -1; dx <= 1; ++dx) {
              const std::size_t x0 = dx < 0 ? 1 : 0;
              const std::size_t x1 = dx > 0 ? wd - 1 : wd;
              double acc = 0.0;
              for (std::size_t x = x0; x < x1; ++x) acc += grow[x] * srow[x + dx];
              dk[(dy + 1) * 3 + (dx + 1)] += acc;
              if (dsrc) {
                const double kv = k[(dy + 1) * 3 + (dx + 1)];
                double* drow = dsrc + sy * static_cast<std::ptrdiff_t>(wd);
                for (std::size_t x = x0; x < x1; ++x) drow[x + dx] += kv * grow[x];
              }
            }
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < d_w.size(); ++i) d_w[i] += local_w[i];
  for (std::size_t i = 0; i < d_b.size(); ++i) d_b[i] += local_b[i];
}

void relu_inplace(Tensor& t) {
  for (double& v : t.values) v = v > 0.0 ? v : 0.0;
}

// Zeroes gradient entries where the forward output was not positive.
void relu_backward(const Tensor& out, Tensor& grad) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(out[i] > 0.0)) grad[i] = 0.0;
}

// 2x2 max-pool, stride 2, floor; ties go to the first element in scan order.
Tensor maxpool2(const Tensor& in, std::vector<std::uint32_t>& arg) {
  const std::size_t batch = in.dim(0), ch = in.dim(1), h = in.dim(2), wd = in.dim(3);
  const std::size_t oh = h / 2, ow = wd / 2;
  Tensor out({batch, ch, oh, ow});
  arg.assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < batch * ch; ++plane) {
    const std::size_t base = plane * h * wd;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++o) {
        std::size_t best = base + (2 * y) * wd + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * y + dy) * wd + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;
          }
        out[o] = in[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return out;
}

Tensor maxpool2_backward(const Tensor& d_out, const std::vector<std::uint32_t>& arg,
                         const std::vector<std::size_t>& in_shape) {
  Tensor d_in(in_shape);
  for (std::size_t i = 0; i < d_out.size(); ++i) d_in[arg[i]] += d_out[i];
  return d_in;
}

// in: B x N (any trailing shape flattened), w: M x N.
Tensor dense(const Tensor& in, const Tensor& w, const Tensor& b) {
  const std::size_t batch = in.dim(0), n_in = w.dim(1), n_out = w.dim(0);
  Tensor out({batch, n_out});
  for (std::size_t s = 0; s < batch; ++s) {
    const double* x = &in.values[s * n_in];
    for (std::size_t m = 0; m < n_out; ++m) {
      const double* wr = &w.values[m * n_in];
      double acc = b[m];
      for (std::size_t j = 0; j < n_in; ++j) acc += wr[j] * x[j];
      out[s * n_out + m] = acc;
    }
  }
  return out;
}

void dense_backward(const Tensor& in, const Tensor& w, const Tensor& d_out, Tensor& d_w,
                    Tensor& d_b, Tensor* d_in) {
  const std::size_t batch = in.dim(0), n_in = w.dim(1), n_out = w.dim(0);
  Tensor local_w(w.shape);
  Tensor local_b(d_b.shape);
  if (d_in) *d_in = Tensor(in.shape);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* x = &in.values[s * n_in];
    for (std::size_t m = 0; m < n_out; ++m) {
      const double g = d_out[s * n_out + m];
      local_b[m] += g;
      double* dw = &local_w.values[m * n_in];
      for (std::size_t j = 0; j < n_in; ++j) dw[j] += g * x[j];
      if (d_in) {
        const double* wr = &w.values[m * n_in];
        double* dx = &d_in->values[s * n_in];
        for (std::size_t j = 0; j < n_in; ++j) dx[j] += g * wr[j];
      }
    }
  }
  for (std::size_t i = 0; i < d_w.size(); ++i) d_w[i] += local_w[i];
  for (std::size_t i = 0; i < d_b.size(); ++i) d_b[i] += local_b[i];
}

BranchCache run_branch(const ParamStore& p, const std::string& prefix, Tensor input) {
  const BranchParams ix = resolve_branch(p, prefix);
  BranchCache c;
  c.input = std::move(input);
  c.act1 = conv3x3(c.input, p[ix.conv1_w].value, p[ix.conv1_b].value);
  relu_inplace(c.act1);
  check_finite(c.act1, prefix + ".conv1");
  c.pool1 = maxpool2(c.act1, c.arg1);
  c.act2 = conv3x3(c.pool1, p[ix.conv2_w].value, p[ix.conv2_b].value);
  relu_inplace(c.act2);
  check_finite(c.act2, prefix + ".conv2");
  c.pool2 = maxpool2(c.act2, c.arg2);
  c.trunk = dense(c.pool2, p[ix.fc_w].value, p[ix.fc_b].value);
  relu_inplace(c.trunk);
  check_finite(c.trunk, prefix + ".fc");
  return c;
}

void backward_branch(const BranchCache& c, const Tensor& d_trunk_in, ParamStore& p,
                     const std::string& prefix) {
  const BranchParams ix = resolve_branch(p, prefix);
  Tensor d_trunk = d_trunk_in;
  relu_backward(c.trunk, d_trunk);
  Tensor d_pool2;
  dense_backward(c.pool2, p[ix.fc_w].value, d_trunk, p.grad(ix.fc_w), p.grad(ix.fc_b), &d_pool2);
  Tensor d_act2 = maxpool2_backward(d_pool2, c.arg2, c.act2.shape);
  relu_backward(c.act2, d_act2);
  Tensor d_pool1;
  conv3x3_backward(c.pool1, p[ix.conv2_w].value, d_act2, p.grad(ix.conv2_w), p.grad(ix.conv2_b),
                   &d_pool1);
  Tensor d_act1 = maxpool2_backward(d_pool1, c.arg1, c.act1.shape);
  relu_backward(c.act1, d_act1);
  conv3x3_backward(c.input, p[ix.conv1_w].value, d_act1, p.grad(ix.conv1_w), p.grad(ix.conv1_b),
                   nullptr);
}

void add_branch(ParamStore& p, const std::string& prefix, const BranchShape& s,
                std::size_t flat_inputs) {
  p.add(prefix + ".conv1.w", {s.c1, 1, 3, 3}, false);
  p.add(prefix + ".conv1.b", {s.c1}, false);
  p.add(prefix + ".conv2.w", {s.c2, s.c1, 3, 3}, false);
  p.add(prefix + ".conv2.b", {s.c2}, false);
  p.add(prefix + ".fc.w", {s.trunk, flat_inputs}, false);
  p.add(prefix + ".fc.b", {s.trunk}, false);
}

void check_same_tape(const ForwardTape& tape, const Objective& objective) {
  if (objective.tape_id != tape.id())
    throw InvalidHandle("objective was not produced from this tape");
}

void check_fresh(const ForwardTape& tape, const ParamStore& params) {
  if (tape.store() != &params) throw StaleTape("tape was recorded against a different ParamStore");
  if (tape.store_version() != params.version())
    throw StaleTape("parameters were modified after the forward pass");
}

}  // namespace

struct TapeBuilder {
  static ForwardTape build(const ParamStore& p, const Tensor& batch) {
    const ModelConfig& cfg = p.config();
    if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != cfg.height ||
        batch.dim(3) != cfg.width || batch.dim(0) == 0)
      throw ConfigError("forward: batch must be B x 1 x " + std::to_string(cfg.height) + " x " +
                        std::to_string(cfg.width));
    check_finite(batch, "input");

    ForwardTape t;
    t.id_ = next_tape_id.fetch_add(1);
    t.batch_ = batch.dim(0);
    t.store_ = &p;
    t.version_ = p.version();
    t.spatial_ = run_branch(p, "spatial", batch);

    const std::size_t spatial_width = t.spatial_.trunk.dim(1);
    std::size_t spectral_width = 0;
    if (cfg.dft_fusion) {
      Tensor spectrum(batch.shape);
      const std::size_t plane = cfg.height * cfg.width;
      for (std::size_t n = 0; n < t.batch_; ++n) {
        const auto f = dft_features(std::span<const double>(batch.values).subspan(n * plane, plane),
                                    cfg.height, cfg.width);
        std::copy(f.begin(), f.end(), spectrum.values.begin() + static_cast<std::ptrdiff_t>(n * plane));
      }
      check_finite(spectrum, "spectral.dft");
      t.spectral_ = run_branch(p, "spectral", std::move(spectrum));
      t.has_spectral_ = true;
      spectral_width = t.spectral_.trunk.dim(1);
    }

    const std::size_t feat = spatial_width + spectral_width;
    t.features_ = Tensor({t.batch_, feat});
    for (std::size_t n = 0; n < t.batch_; ++n) {
      auto dst = t.features_.row(n);
      const auto a = t.spatial_.trunk.row(n);
      std::copy(a.begin(), a.end(), dst.begin());
      if (t.has_spectral_) {
        const auto b = t.spectral_.trunk.row(n);
        std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(spatial_width));
      }
    }
    t.severity_logits_ = dense(t.features_, p[p.index_of("severity.w")].value,
                               p[p.index_of("severity.b")].value);
    check_finite(t.severity_logits_, "severity");
    t.axis_logits_ =
        dense(t.features_, p[p.index_of("axis.w")].value, p[p.index_of("axis.b")].value);
    check_finite(t.axis_logits_, "axis");
    return t;
  }
};

void ModelConfig::validate() const {
  if (height < 4 || width < 4) throw ConfigError("model input must be at least 4x4");
  if (conv1_channels == 0 || conv2_channels == 0 || trunk_width == 0)
    throw ConfigError("channel and trunk widths must be positive");
  if (severity_classes != kSeverityClasses || axis_classes != kAxisClasses)
    throw ConfigError("severity and axis heads are fixed at 3 classes");
}

std::size_t ModelConfig::feature_width() const {
  return trunk_width + (dft_fusion ? half_width(trunk_width) : 0);
}

std::size_t ParamStore::add(std::string name, std::vector<std::size_t> shape,
                            bool classification_head) {
  for (const auto& p : params_)
    if (p.name == name) throw ConfigError("duplicate parameter name: " + name);
  Parameter p{std::move(name), Tensor(shape), Tensor(shape), classification_head};
  params_.push_back(std::move(p));
  ++version_;
  return params_.size() - 1;
}

std::size_t ParamStore::num_values() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  throw ConfigError("unknown parameter: " + std::string(name));
}

Tensor& ParamStore::mutable_value(std::size_t i) {
  ++version_;
  return params_.at(i).value;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

std::vector<double> ParamStore::flat_grad() const {
  std::vector<double> out;
  out.reserve(num_values());
  for (const auto& p : params_) out.insert(out.end(), p.grad.values.begin(), p.grad.values.end());
  return out;
}

std::size_t ParamStore::head_size() const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.classification_head) n += p.value.size();
  return n;
}

ParamStore init_model(const ModelConfig& config) {
  config.validate();
  ParamStore p(config);
  const std::size_t flat = config.conv2_channels * (config.height / 4) * (config.width / 4);
  add_branch(p, "spatial", spatial_shape(config), flat);
  if (config.dft_fusion) {
    const BranchShape s = spectral_shape(config);
    add_branch(p, "spectral", s, s.c2 * (config.height / 4) * (config.width / 4));
  }
  const std::size_t feat = config.feature_width();
  p.add("severity.w", {config.severity_outputs(), feat}, true);
  p.add("severity.b", {config.severity_outputs()}, true);
  p.add("axis.w", {config.axis_classes, feat}, false);
  p.add("axis.b", {config.axis_classes}, false);

  for (std::size_t i = 0; i < p.size(); ++i) {
    const Parameter& param = p[i];
    if (param.value.rank() == 1) continue;  // biases stay zero
    std::size_t fan_out = param.value.dim(0);
    std::size_t fan_in = param.value.size() / fan_out;
    if (param.value.rank() == 4) fan_out *= 9;  // receptive field
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Stream rng(config.seed, "init", i);
    for (double& v : p.mutable_value(i).values) v = rng.uniform(-limit, limit);
  }
  return p;
}

Objective& Objective::add_scaled(const Objective& other, double scale) {
  if (other.tape_id != tape_id) throw InvalidHandle("cannot combine objectives from different tapes");
  if (other.d_severity.shape != d_severity.shape || other.d_axis.shape != d_axis.shape)
    throw InvalidHandle("objective shapes differ");
  value += scale * other.value;
  for (std::size_t i = 0; i < d_severity.size(); ++i) d_severity[i] += scale * other.d_severity[i];
  for (std::size_t i = 0; i < d_axis.size(); ++i) d_axis[i] += scale * other.d_axis[i];
  return *this;
}

Objective ForwardTape::zero_objective() const {
  return Objective{id_, 0.0, Tensor(severity_logits_.shape), Tensor(axis_logits_.shape)};
}

Objective ForwardTape::severity_objective(double value, Tensor d_severity) const {
  if (d_severity.shape != severity_logits_.shape)
    throw InvalidHandle("severity gradient shape does not match the tape's logits");
  return Objective{id_, value, std::move(d_severity), Tensor(axis_logits_.shape)};
}

Objective ForwardTape::axis_objective(double value, Tensor d_axis) const {
  if (d_axis.shape != axis_logits_.shape)
    throw InvalidHandle("axis gradient shape does not match the tape's logits");
  return Objective{id_, value, Tensor(severity_logits_.shape), std::move(d_axis)};
}

std::vector<std::uint8_t> ForwardTape::activation_signature() const {
  std::vector<std::uint8_t> sig;
  auto push_index = [&sig](std::uint32_t a) {
    for (int shift = 0; shift < 32; shift += 8) sig.push_back(static_cast<std::uint8_t>(a >> shift));
  };
  auto push_branch = [&](const BranchCache& c) {
    for (double v : c.act1.values) sig.push_back(v > 0.0);
    for (auto a : c.arg1) push_index(a);
    for (double v : c.act2.values) sig.push_back(v > 0.0);
    for (auto a : c.arg2) push_index(a);
    for (double v : c.trunk.values) sig.push_back(v > 0.0);
  };
  push_branch(spatial_);
  if (has_spectral_) push_branch(spectral_);
  return sig;
}

ForwardTape forward(const ParamStore& params, const Tensor& batch) {
  return TapeBuilder::build(params, batch);
}

void backward_total(const ForwardTape& tape, const Objective& objective, double upstream,
                    ParamStore& params) {
  check_same_tape(tape, objective);
  check_fresh(tape, params);
  if (upstream == 0.0) return;

  Tensor d_sev = objective.d_severity;
  for (double& v : d_sev.values) v *= upstream;
  Tensor d_axis = objective.d_axis;
  for (double& v : d_axis.values) v *= upstream;

  Tensor d_feat_sev, d_feat_axis;
  const std::size_t sw = params.index_of("severity.w"), sb = params.index_of("severity.b");
  const std::size_t aw = params.index_of("axis.w"), ab = params.index_of("axis.b");
  dense_backward(tape.features_, params[sw].value, d_sev, params.grad(sw), params.grad(sb),
                 &d_feat_sev);
  dense_backward(tape.features_, params[aw].value, d_axis, params.grad(aw), params.grad(ab),
                 &d_feat_axis);

  const std::size_t batch = tape.batch_;
  const std::size_t sp_width = tape.spatial_.trunk.dim(1);
  const std::size_t feat = tape.features_.dim(1);
  Tensor d_spatial({batch, sp_width});
  Tensor d_spectral({batch, feat - sp_width});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t j = 0; j < feat; ++j) {
      const double g = d_feat_sev[n * feat + j] + d_feat_axis[n * feat + j];
      if (j < sp_width)
        d_spatial[n * sp_width + j] = g;
      else
        d_spectral[n * (feat - sp_width) + (j - sp_width)] = g;
    }
  }
  backward_branch(tape.spatial_, d_spatial, params, "spatial");
  if (tape.has_spectral_) backward_branch(tape.spectral_, d_spectral, params, "spectral");
}

std::vector<double> head_grad(const ForwardTape& tape, const Objective& objective,
                              const ParamStore& params) {
  check_same_tape(tape, objective);
  check_fresh(tape, params);
  const std::size_t sw = params.index_of("severity.w");
  const std::size_t sb = params.index_of("severity.b");
  if (!params[sw].classification_head || !params[sb].classification_head)
    throw ConfigError("severity head is not flagged as the classification head");
  Tensor gw(params[sw].value.shape);
  Tensor gb(params[sb].value.shape);
  dense_backward(tape.features(), params[sw].value, objective.d_severity, gw, gb, nullptr);
  std::vector<double> flat(gw.values);
  flat.insert(flat.end(), gb.values.begin(), gb.values.end());
  return flat;
}

AdamState AdamState::zeros_like(const ParamStore& params) {
  AdamState s;
  for (const auto& p : params.params()) {
    s.first_moment.emplace_back(p.value.shape);
    s.second_moment.emplace_back(p.value.shape);
  }
  return s;
}

void adam_step(ParamStore& params, AdamState& state, double lr, const AdamOptions& options) {
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw ConfigError("adam state does not match the parameter store");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.first_moment[i].shape != params[i].value.shape ||
        state.second_moment[i].shape != params[i].value.shape)
      throw ConfigError("adam state shape mismatch for " + params[i].name);

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = params[i].grad;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    Tensor& w = params.mutable_value(i);
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * g[j];
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + options.epsilon);
    }
  }
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min) {
  if (total_steps < 1) throw ArgumentError("cosine_lr: total_steps must be at least 1");
  if (step < 0 || step > total_steps) throw ArgumentError("cosine_lr: step out of range");
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

std::vector<std::complex<double>> dft2(std::span<const double> image, std::size_t height,
                                       std::size_t width) {
  if (image.size() != height * width) throw ConfigError("dft2: image size does not match dims");
  for (double v : image)
    if (!std::isfinite(v)) throw NumericFault("dft", "non-finite input");

  auto twiddles = [](std::size_t n) {
    std::vector<std::complex<double>> t(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      t[k] = {std::cos(a), std::sin(a)};
    }
    return t;
  };
  const auto tw_row = twiddles(width);
  const auto tw_col = twiddles(height);
  // Transform x - x0 and add x0 back at DC; constant images give exact zeros
  // away from DC.
  const double offset = image.empty() ? 0.0 : image[0];

  // Row transforms.
  std::vector<std::complex<double>> rows(height * width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t v = 0; v < width; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t x = 0; x < width; ++x)
        acc += (image[y * width + x] - offset) * tw_row[(v * x) % width];
      rows[y * width + v] = acc;
    }
  // Column transforms.
  std::vector<std::complex<double>> out(height * width);
  for (std::size_t u = 0; u < height; ++u)
    for (std::size_t v = 0; v < width; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t y = 0; y < height; ++y) acc += rows[y * width + v] * tw_col[(u * y) % height];
      out[u * width + v] = acc;
    }
  if (!out.empty()) out[0] += offset * static_cast<double>(height * width);
  return out;
}

std::vector<double> dft_features(std::span<const double> image, std::size_t height,
                                 std::size_t width) {
  const auto spectrum = dft2(image, height, width);
  std::vector<double> out(spectrum.size());
  for (std::size_t i = 0; i < spectrum.size(); ++i) out[i] = std::log1p(std::abs(spectrum[i]));
  return out;
}

}  // namespace gradbal
