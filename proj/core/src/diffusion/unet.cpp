#include "casgen/diffusion/unet.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace casgen::diffusion {

int norm_groups_for(int channels, int preferred) {
  int g = std::min(channels, preferred);
  while (g > 1 && channels % g != 0) --g;
  return g;
}

std::string DenoiserSpec::describe() const {
  std::ostringstream os;
  os << "unet(in=" << in_channels << ",w=" << base_width << ",levels=" << levels
     << ",tdim=" << time_dim << ",dcond=" << d_cond << ",groups=" << groups << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// ResBlock

ResBlock::ResBlock(int channels, int time_dim, int groups, nn::Rng& rng)
    : gn1_(norm_groups_for(channels, groups), channels),
      conv1_(channels, channels, 3, 1, 1, rng),
      emb_proj_(time_dim, channels, rng),
      gn2_(norm_groups_for(channels, groups), channels),
      conv2_(channels, channels, 3, 1, 1, rng),
      channels_(channels) {}

nn::Tensor ResBlock::forward(const nn::Tensor& x, const nn::Tensor& emb, bool train) {
  nn::Tensor h = conv1_.forward(act1_.forward(gn1_.forward(x, train), train), train);
  h_shape_ = h.shape();
  const int n = h.dim(0);
  const std::int64_t hw = static_cast<std::int64_t>(h.dim(2)) * h.dim(3);
  nn::Tensor p = emb_proj_.forward(emb, train);  // (N, channels)
  for (int s = 0; s < n; ++s)
    for (int c = 0; c < channels_; ++c) {
      const double add = p[static_cast<std::int64_t>(s) * channels_ + c];
      double* ptr = h.data() + (static_cast<std::int64_t>(s) * channels_ + c) * hw;
      for (std::int64_t i = 0; i < hw; ++i) ptr[i] += add;
    }
  nn::Tensor r = conv2_.forward(act2_.forward(gn2_.forward(h, train), train), train);
  for (std::int64_t i = 0; i < r.size(); ++i) r[i] += x[i];
  return r;
}

nn::Tensor ResBlock::backward(const nn::Tensor& dy, nn::Tensor& demb) {
  nn::Tensor g = gn2_.backward(act2_.backward(conv2_.backward(dy)));
  const int n = h_shape_[0];
  const std::int64_t hw = static_cast<std::int64_t>(h_shape_[2]) * h_shape_[3];
  nn::Tensor dp({n, channels_});
  for (int s = 0; s < n; ++s)
    for (int c = 0; c < channels_; ++c) {
      const double* ptr = g.data() + (static_cast<std::int64_t>(s) * channels_ + c) * hw;
      double sum = 0.0;
      for (std::int64_t i = 0; i < hw; ++i) sum += ptr[i];
      dp[static_cast<std::int64_t>(s) * channels_ + c] = sum;
    }
  nn::Tensor de = emb_proj_.backward(dp);
  for (std::int64_t i = 0; i < demb.size(); ++i) demb[i] += de[i];
  nn::Tensor dx = gn1_.backward(act1_.backward(conv1_.backward(g)));
  for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
  return dx;
}

std::vector<nn::Param*> ResBlock::params() {
  return nn::collect_params({&gn1_, &conv1_, &emb_proj_, &gn2_, &conv2_});
}

// ---------------------------------------------------------------------------
// UNet

namespace {
nn::Rng make_rng(std::uint64_t seed) { return nn::Rng(seed); }
}  // namespace

UNet::UNet(const DenoiserSpec& spec, std::uint64_t seed)
    : spec_(spec),
      stem_([&] {
        if (spec.time_dim % 2 != 0) throw std::invalid_argument("UNet: time_dim must be even");
        if (spec.levels < 1) throw std::invalid_argument("UNet: levels < 1");
        auto rng = make_rng(seed);
        return nn::Conv2d(spec.in_channels, spec.base_width, 3, 1, 1, rng);
      }()),
      mid_([&] {
        auto rng = make_rng(nn::derive_seed(seed, 1));
        return ResBlock(spec.base_width << (spec.levels - 1), spec.time_dim, spec.groups, rng);
      }()),
      out_gn_(norm_groups_for(spec.base_width, spec.groups), spec.base_width),
      out_conv_([&] {
        auto rng = make_rng(nn::derive_seed(seed, 2));
        return nn::Conv2d(spec.base_width, spec.in_channels, 3, 1, 1, rng);
      }()),
      time_lin1_([&] {
        auto rng = make_rng(nn::derive_seed(seed, 3));
        return nn::Linear(spec.time_dim, spec.time_dim, rng);
      }()),
      time_lin2_([&] {
        auto rng = make_rng(nn::derive_seed(seed, 4));
        return nn::Linear(spec.time_dim, spec.time_dim, rng);
      }()),
      cond_proj_([&] {
        auto rng = make_rng(nn::derive_seed(seed, 5));
        return nn::Linear(spec.d_cond, spec.time_dim, rng);
      }()) {
  for (int l = 0; l < spec.levels; ++l) {
    const int w = spec.base_width << l;
    auto rng = make_rng(nn::derive_seed(seed, 10 + static_cast<std::uint64_t>(l)));
    down_blocks_.emplace_back(w, spec.time_dim, spec.groups, rng);
    if (l < spec.levels - 1) {
      auto rng2 = make_rng(nn::derive_seed(seed, 20 + static_cast<std::uint64_t>(l)));
      down_convs_.emplace_back(w, 2 * w, 3, 2, 1, rng2);
    }
  }
  for (int l = spec.levels - 2; l >= 0; --l) {
    const int w = spec.base_width << l;
    auto rng = make_rng(nn::derive_seed(seed, 30 + static_cast<std::uint64_t>(l)));
    up_convs_.emplace_back(2 * w, w, 3, 1, 1, rng);
    upsamples_.emplace_back();
    auto rng2 = make_rng(nn::derive_seed(seed, 40 + static_cast<std::uint64_t>(l)));
    up_blocks_.emplace_back(w, spec.time_dim, spec.groups, rng2);
  }
}

nn::Tensor UNet::time_embedding(const std::vector<int>& t, int total_timesteps) const {
  const int n = static_cast<int>(t.size());
  const int half = spec_.time_dim / 2;
  nn::Tensor out({n, spec_.time_dim});
  for (int s = 0; s < n; ++s) {
    if (t[static_cast<size_t>(s)] < 0 || t[static_cast<size_t>(s)] >= total_timesteps)
      throw std::out_of_range("UNet: timestep out of range");
    for (int k = 0; k < half; ++k) {
      const double freq =
          std::exp(-std::log(10000.0) * static_cast<double>(k) / std::max(1, half - 1));
      const double arg = static_cast<double>(t[static_cast<size_t>(s)]) * freq;
      out[static_cast<std::int64_t>(s) * spec_.time_dim + k] = std::sin(arg);
      out[static_cast<std::int64_t>(s) * spec_.time_dim + half + k] = std::cos(arg);
    }
  }
  return out;
}

nn::Tensor UNet::forward(const nn::Tensor& x, const std::vector<int>& t, int total_timesteps,
                         const nn::Tensor& cond, bool train) {
  const int n = x.dim(0);
  if (static_cast<int>(t.size()) != n) throw std::invalid_argument("UNet: t size mismatch");
  if (cond.dim(0) != n || cond.dim(1) != spec_.d_cond)
    throw std::invalid_argument("UNet: cond shape mismatch");
  batch_ = n;

  nn::Tensor emb = time_lin2_.forward(
      time_act_.forward(time_lin1_.forward(time_embedding(t, total_timesteps), train), train),
      train);
  nn::Tensor cp = cond_proj_.forward(cond, train);
  for (std::int64_t i = 0; i < emb.size(); ++i) emb[i] += cp[i];

  nn::Tensor h = stem_.forward(x, train);
  skips_.clear();
  for (int l = 0; l < spec_.levels; ++l) {
    h = down_blocks_[static_cast<size_t>(l)].forward(h, emb, train);
    if (l < spec_.levels - 1) {
      skips_.push_back(h);
      h = down_convs_[static_cast<size_t>(l)].forward(h, train);
    }
  }
  h = mid_.forward(h, emb, train);
  for (size_t u = 0; u < up_blocks_.size(); ++u) {
    h = up_convs_[u].forward(upsamples_[u].forward(h, train), train);
    const nn::Tensor& skip = skips_[skips_.size() - 1 - u];
    for (std::int64_t i = 0; i < h.size(); ++i) h[i] += skip[i];
    h = up_blocks_[u].forward(h, emb, train);
  }
  return out_conv_.forward(out_act_.forward(out_gn_.forward(h, train), train), train);
}

nn::Tensor UNet::backward(const nn::Tensor& deps) {
  nn::Tensor demb({batch_, spec_.time_dim});
  nn::Tensor g = out_gn_.backward(out_act_.backward(out_conv_.backward(deps)));

  // Up path, reverse of the forward up loop; the residual add sends the
  // incoming gradient into both the up branch and the stored skip.
  std::vector<nn::Tensor> skip_grads(skips_.size());
  for (size_t u = up_blocks_.size(); u-- > 0;) {
    g = up_blocks_[u].backward(g, demb);
    skip_grads[skips_.size() - 1 - u] = g;
    g = upsamples_[u].backward(up_convs_[u].backward(g));
  }

  g = mid_.backward(g, demb);
  for (int l = spec_.levels - 1; l >= 0; --l) {
    if (l < spec_.levels - 1) {
      g = down_convs_[static_cast<size_t>(l)].backward(g);
      const nn::Tensor& sg = skip_grads[static_cast<size_t>(l)];
      for (std::int64_t i = 0; i < g.size(); ++i) g[i] += sg[i];
    }
    g = down_blocks_[static_cast<size_t>(l)].backward(g, demb);
  }
  (void)stem_.backward(g);

  nn::Tensor dcond = cond_proj_.backward(demb);
  (void)time_lin1_.backward(time_act_.backward(time_lin2_.backward(demb)));
  return dcond;
}

std::vector<nn::Param*> UNet::params() {
  std::vector<nn::Param*> out;
  auto add = [&](std::vector<nn::Param*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  add(stem_.params());
  for (auto& b : down_blocks_) add(b.params());
  for (auto& c : down_convs_) add(c.params());
  add(mid_.params());
  for (auto& c : up_convs_) add(c.params());
  for (auto& b : up_blocks_) add(b.params());
  add(out_gn_.params());
  add(out_conv_.params());
  add(time_lin1_.params());
  add(time_lin2_.params());
  add(cond_proj_.params());
  return out;
}

std::vector<const nn::Param*> UNet::params() const {
  auto* self = const_cast<UNet*>(this);
  auto ps = self->params();
  return {ps.begin(), ps.end()};
}

std::int64_t UNet::param_count() const {
  std::int64_t n = 0;
  for (const nn::Param* p : params()) n += p->value.size();
  return n;
}

}  // namespace casgen::diffusion
