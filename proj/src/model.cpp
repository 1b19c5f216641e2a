#include "lapgsr/model.hpp"

#include <set>

#include "lapgsr/error.hpp"
#include "lapgsr/ops.hpp"
#include "lapgsr/optim.hpp"

namespace lapgsr {

void GeneratorConfig::validate(bool allow_zero_blocks) const {
  auto fail = [](const std::string& msg) { throw ConfigError("generator config: " + msg); };
  const int64_t min_blocks = allow_zero_blocks ? 0 : 1;
  if (blocks_ltb < min_blocks || blocks_mtb < min_blocks || blocks_htb < min_blocks) {
    fail("block counts must be >= " + std::to_string(min_blocks));
  }
  if (channels != 1 && channels != 3) fail("channels must be 1 or 3");
  if (width_ltb < channels || width_mtb < channels || width_htb < channels) {
    fail("branch widths must be >= channels");
  }
  if (stem_ltb < 0) fail("stem_ltb must be >= 0");
  if (scale != 4) fail("only a scale factor of 4 is supported");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{{"blocks_ltb", c.blocks_ltb}, {"blocks_mtb", c.blocks_mtb},
                     {"blocks_htb", c.blocks_htb}, {"width_ltb", c.width_ltb},
                     {"width_mtb", c.width_mtb},   {"width_htb", c.width_htb},
                     {"stem_ltb", c.stem_ltb},     {"channels", c.channels},
                     {"scale", c.scale}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  static const std::set<std::string> kKeys{"blocks_ltb", "blocks_mtb", "blocks_htb",
                                           "width_ltb",  "width_mtb",  "width_htb",
                                           "stem_ltb",   "channels",   "scale"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw ConfigError("generator config: unknown key '" + key + "'");
  }
  auto read = [&](const char* key, int64_t& field) {
    if (j.contains(key)) field = j.at(key).get<int64_t>();
  };
  read("blocks_ltb", c.blocks_ltb);
  read("blocks_mtb", c.blocks_mtb);
  read("blocks_htb", c.blocks_htb);
  read("width_ltb", c.width_ltb);
  read("width_mtb", c.width_mtb);
  read("width_htb", c.width_htb);
  read("stem_ltb", c.stem_ltb);
  read("channels", c.channels);
  read("scale", c.scale);
}

Conv2d Conv2d::make(int64_t in_c, int64_t out_c, int64_t kernel, int64_t stride,
                    int64_t padding, Rng& rng) {
  Conv2d conv;
  conv.weight = kaiming_normal(Shape{out_c, in_c, kernel, kernel}, rng);
  conv.weight.set_requires_grad(true);
  conv.bias = Tensor(Shape{1, out_c, 1, 1});
  conv.bias.set_requires_grad(true);
  conv.stride = stride;
  conv.padding = padding;
  return conv;
}

Tensor Conv2d::operator()(Tape& tape, const Tensor& x) const {
  return conv2d(tape, x, weight, bias, stride, padding);
}

void Conv2d::collect(const std::string& prefix, NamedTensors& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

ResidualBlock ResidualBlock::make(int64_t width, Rng& rng) {
  ResidualBlock block;
  block.conv1 = Conv2d::make(width, width, 3, 1, 1, rng);
  block.conv2 = Conv2d::make(width, width, 3, 1, 1, rng);
  return block;
}

Tensor ResidualBlock::operator()(Tape& tape, const Tensor& x) const {
  return add(tape, x, conv2(tape, leaky_relu(tape, conv1(tape, x))));
}

void ResidualBlock::collect(const std::string& prefix, NamedTensors& out) const {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
}

namespace {
std::vector<ResidualBlock> make_blocks(int64_t count, int64_t width, Rng& rng) {
  std::vector<ResidualBlock> blocks;
  for (int64_t i = 0; i < count; ++i) blocks.push_back(ResidualBlock::make(width, rng));
  return blocks;
}

Tensor run_blocks(Tape& tape, const std::vector<ResidualBlock>& blocks, Tensor x) {
  for (const ResidualBlock& b : blocks) x = b(tape, x);
  return x;
}

void collect_blocks(const std::string& prefix, const std::vector<ResidualBlock>& blocks,
                    NamedTensors& out) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    blocks[i].collect(prefix + ".blocks." + std::to_string(i), out);
  }
}
}  // namespace

Generator::Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const int64_t c = cfg_.channels;
  if (cfg_.stem_ltb > 0) {
    ltb_stem_ = Conv2d::make(c, cfg_.stem_ltb, 3, 1, 1, rng);
    ltb_expand_ = Conv2d::make(cfg_.stem_ltb, cfg_.width_ltb, 3, 1, 1, rng);
    ltb_blocks_ = make_blocks(cfg_.blocks_ltb, cfg_.width_ltb, rng);
    ltb_reduce_ = Conv2d::make(cfg_.width_ltb, cfg_.stem_ltb, 3, 1, 1, rng);
    ltb_out_ = Conv2d::make(cfg_.stem_ltb, c, 3, 1, 1, rng);
  } else {
    ltb_stem_ = Conv2d::make(c, cfg_.width_ltb, 3, 1, 1, rng);
    ltb_expand_ = Conv2d::make(cfg_.width_ltb, cfg_.width_ltb, 3, 1, 1, rng);
    ltb_blocks_ = make_blocks(cfg_.blocks_ltb, cfg_.width_ltb, rng);
    ltb_out_ = Conv2d::make(cfg_.width_ltb, c, 3, 1, 1, rng);
  }
  mtb_in_ = Conv2d::make(2 * c, cfg_.width_mtb, 3, 1, 1, rng);
  mtb_blocks_ = make_blocks(cfg_.blocks_mtb, cfg_.width_mtb, rng);
  mtb_out_ = Conv2d::make(cfg_.width_mtb, c, 3, 1, 1, rng);
  htb_in_ = Conv2d::make(2 * c, cfg_.width_htb, 3, 1, 1, rng);
  htb_blocks_ = make_blocks(cfg_.blocks_htb, cfg_.width_htb, rng);
  htb_out_ = Conv2d::make(cfg_.width_htb, c, 3, 1, 1, rng);

  // Identity start: residual blocks pass through, the gate is 1, the middle
  // band is 0 and the high branch cancels its L3 skip, so the untrained
  // model collapses to up2(up2(thermal)).
  for (auto* blocks : {&ltb_blocks_, &mtb_blocks_, &htb_blocks_}) {
    for (ResidualBlock& b : *blocks) std::ranges::fill(b.conv2.weight.data(), 0.0f);
  }
  for (Conv2d* conv : {&ltb_out_, &mtb_out_, &htb_out_}) {
    std::ranges::fill(conv->weight.data(), 0.0f);
  }
  std::ranges::fill(ltb_out_.bias.data(), 1.0f);
  if (cfg_.width_htb >= 2 * c) {
    // Channels 2k and 2k+1 carry +L3_k and -L3_k; since
    // leaky_relu(v) - leaky_relu(-v) = (1 + slope) v, the output conv
    // recovers -L3_k exactly.
    const float gain = 1.0f / (1.0f + kLeakySlope);
    for (int64_t k = 0; k < c; ++k) {
      for (int64_t o : {2 * k, 2 * k + 1}) {
        for (int64_t i = 0; i < 2 * c; ++i) {
          for (int64_t t = 0; t < 9; ++t) htb_in_.weight.data()[(o * 2 * c + i) * 9 + t] = 0.0f;
        }
        htb_in_.bias.data()[o] = 0.0f;
      }
      htb_in_.weight.data()[((2 * k) * 2 * c + c + k) * 9 + 4] = 1.0f;
      htb_in_.weight.data()[((2 * k + 1) * 2 * c + c + k) * 9 + 4] = -1.0f;
      htb_out_.weight.data()[(k * cfg_.width_htb + 2 * k) * 9 + 4] = -gain;
      htb_out_.weight.data()[(k * cfg_.width_htb + 2 * k + 1) * 9 + 4] = gain;
    }
  }
}

NamedTensors Generator::named_parameters() const {
  NamedTensors out;
  ltb_stem_.collect("ltb.stem", out);
  ltb_expand_.collect("ltb.expand", out);
  collect_blocks("ltb", ltb_blocks_, out);
  if (ltb_reduce_.weight.defined()) ltb_reduce_.collect("ltb.reduce", out);
  ltb_out_.collect("ltb.out", out);
  mtb_in_.collect("mtb.in", out);
  collect_blocks("mtb", mtb_blocks_, out);
  mtb_out_.collect("mtb.out", out);
  htb_in_.collect("htb.in", out);
  collect_blocks("htb", htb_blocks_, out);
  htb_out_.collect("htb.out", out);
  return out;
}

std::vector<Tensor> Generator::parameters() const {
  std::vector<Tensor> params;
  for (auto& [name, t] : named_parameters()) params.push_back(t);
  return params;
}

int64_t Generator::parameter_count() const {
  int64_t total = 0;
  for (const auto& [name, t] : named_parameters()) total += t.numel();
  return total;
}

Tensor Generator::low_branch(Tape& tape, const Tensor& l1) const {
  Tensor x = leaky_relu(tape, instance_norm(tape, ltb_stem_(tape, l1)));
  x = leaky_relu(tape, ltb_expand_(tape, x));
  x = run_blocks(tape, ltb_blocks_, x);
  if (ltb_reduce_.weight.defined()) x = leaky_relu(tape, ltb_reduce_(tape, x));
  return ltb_out_(tape, x);
}

Tensor Generator::mid_branch(Tape& tape, const Tensor& x) const {
  Tensor h = leaky_relu(tape, mtb_in_(tape, x));
  h = run_blocks(tape, mtb_blocks_, h);
  return mtb_out_(tape, h);
}

Tensor Generator::high_branch(Tape& tape, const Tensor& x) const {
  Tensor h = leaky_relu(tape, htb_in_(tape, x));
  h = run_blocks(tape, htb_blocks_, h);
  return htb_out_(tape, h);
}

GeneratorOutput Generator::forward(Tape& tape, const Tensor& guide,
                                   const Tensor& thermal_lr) const {
  if (guide.shape().c != cfg_.channels) {
    throw ShapeError("generator: guide " + guide.shape().str() + " does not have " +
                     std::to_string(cfg_.channels) + " channels");
  }
  require_finite(guide, "guide input");
  require_finite(thermal_lr, "thermal input");
  const PyramidLevels pyr = build_modified_pyramid(guide, thermal_lr);

  GeneratorOutput out;
  const Tensor gate = low_branch(tape, pyr.l1);
  require_finite(gate, "low transformation branch");
  out.layers.low = mul(tape, gate, pyr.l1);

  const Tensor mid_in =
      concat_channels(tape, bicubic_resize(tape, out.layers.low, ResizeScale::kUp2), pyr.l2);
  out.layers.mid = tanh_act(tape, mid_branch(tape, mid_in));
  require_finite(out.layers.mid, "middle transformation branch");

  const Tensor high_in =
      concat_channels(tape, bicubic_resize(tape, out.layers.mid, ResizeScale::kUp2), pyr.l3);
  out.layers.high = tanh_act(tape, add(tape, high_branch(tape, high_in), pyr.l3));
  require_finite(out.layers.high, "high transformation branch");

  out.prediction_raw = collapse_raw(tape, out.layers);
  out.prediction = clamp01(out.prediction_raw);
  return out;
}

Discriminator::Discriminator(int64_t channels, Rng& rng) : channels_(channels) {
  layers_.push_back(Conv2d::make(channels, 32, 4, 2, 1, rng));
  layers_.push_back(Conv2d::make(32, 64, 4, 2, 1, rng));
  layers_.push_back(Conv2d::make(64, 128, 4, 2, 1, rng));
  layers_.push_back(Conv2d::make(128, 1, 3, 1, 1, rng));
}

NamedTensors Discriminator::named_parameters() const {
  NamedTensors out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect("disc.conv" + std::to_string(i), out);
  }
  return out;
}

std::vector<Tensor> Discriminator::parameters() const {
  std::vector<Tensor> params;
  for (auto& [name, t] : named_parameters()) params.push_back(t);
  return params;
}

Tensor Discriminator::forward(Tape& tape, const Tensor& y) const {
  const Shape& s = y.shape();
  if (s.h < kMinExtent || s.w < kMinExtent) {
    throw ShapeError("discriminator: input " + s.str() + " is smaller than " +
                     std::to_string(kMinExtent) + " px");
  }
  if (s.c != channels_) {
    throw ShapeError("discriminator: expected " + std::to_string(channels_) + " channels, got " +
                     s.str());
  }
  Tensor x = leaky_relu(tape, layers_[0](tape, y));
  x = leaky_relu(tape, instance_norm(tape, layers_[1](tape, x)));
  x = leaky_relu(tape, instance_norm(tape, layers_[2](tape, x)));
  return layers_[3](tape, x);
}

namespace {
int64_t conv_params(int64_t in_c, int64_t out_c) { return out_c * in_c * 9 + out_c; }
int64_t block_params(int64_t width) { return 2 * conv_params(width, width); }
}  // namespace

int64_t count_params(const GeneratorConfig& cfg) {
  cfg.validate(true);
  const int64_t c = cfg.channels;
  int64_t ltb = cfg.blocks_ltb * block_params(cfg.width_ltb);
  if (cfg.stem_ltb > 0) {
    ltb += conv_params(c, cfg.stem_ltb) + conv_params(cfg.stem_ltb, cfg.width_ltb) +
           conv_params(cfg.width_ltb, cfg.stem_ltb) + conv_params(cfg.stem_ltb, c);
  } else {
    ltb += conv_params(c, cfg.width_ltb) + conv_params(cfg.width_ltb, cfg.width_ltb) +
           conv_params(cfg.width_ltb, c);
  }
  const int64_t mtb = conv_params(2 * c, cfg.width_mtb) +
                      cfg.blocks_mtb * block_params(cfg.width_mtb) +
                      conv_params(cfg.width_mtb, c);
  const int64_t htb = conv_params(2 * c, cfg.width_htb) +
                      cfg.blocks_htb * block_params(cfg.width_htb) +
                      conv_params(cfg.width_htb, c);
  return ltb + mtb + htb;
}

FlopBreakdown estimate_flops_breakdown(const GeneratorConfig& cfg, int64_t hr_h, int64_t hr_w) {
  cfg.validate(true);
  if (hr_h % 4 != 0 || hr_w % 4 != 0 || hr_h <= 0 || hr_w <= 0) {
    throw ShapeError("estimate_flops: extents must be positive multiples of 4");
  }
  const int64_t c = cfg.channels;
  auto conv = [](int64_t in_c, int64_t out_c, double pixels) {
    return 2.0 * 9.0 * static_cast<double>(in_c * out_c) * pixels;
  };
  const double low_px = static_cast<double>(hr_h / 4) * static_cast<double>(hr_w / 4);
  const double mid_px = static_cast<double>(hr_h / 2) * static_cast<double>(hr_w / 2);
  const double high_px = static_cast<double>(hr_h) * static_cast<double>(hr_w);

  FlopBreakdown f;
  const int64_t wl = cfg.width_ltb;
  f.ltb = 2.0 * static_cast<double>(cfg.blocks_ltb) * conv(wl, wl, low_px);
  if (cfg.stem_ltb > 0) {
    const int64_t s = cfg.stem_ltb;
    f.ltb += conv(c, s, low_px) + conv(s, wl, low_px) + conv(wl, s, low_px) + conv(s, c, low_px);
  } else {
    f.ltb += conv(c, wl, low_px) + conv(wl, wl, low_px) + conv(wl, c, low_px);
  }
  const int64_t wm = cfg.width_mtb;
  f.mtb = conv(2 * c, wm, mid_px) + 2.0 * static_cast<double>(cfg.blocks_mtb) * conv(wm, wm, mid_px) +
          conv(wm, c, mid_px);
  const int64_t wh = cfg.width_htb;
  f.htb = conv(2 * c, wh, high_px) +
          2.0 * static_cast<double>(cfg.blocks_htb) * conv(wh, wh, high_px) + conv(wh, c, high_px);
  f.ltb *= 1e-9;
  f.mtb *= 1e-9;
  f.htb *= 1e-9;
  return f;
}

double estimate_flops(const GeneratorConfig& cfg, int64_t hr_h, int64_t hr_w) {
  return estimate_flops_breakdown(cfg, hr_h, hr_w).total();
}

}  // namespace lapgsr
