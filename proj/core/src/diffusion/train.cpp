#include "casgen/diffusion/train.hpp"

#include "casgen/nn/optim.hpp"
#include "casgen/nn/rng.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace casgen::diffusion {

std::string TrainConfig::describe() const {
  std::ostringstream os;
  os << "train(epochs=" << epochs << ",bs=" << batch_size << ",lr=" << lr
     << ",wd=" << weight_decay << ",clip=" << clip_norm << ",uncond=" << uncond_prob << ")";
  return os.str();
}

TrainConfig stage1_preset() {
  TrainConfig c;
  c.epochs = 50;
  c.batch_size = 64;
  c.lr = 1e-4;
  return c;
}

TrainConfig stage3_preset() {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 16;
  c.lr = 1e-5;
  return c;
}

double cosine_lr(long step, long total_steps, double lr0) {
  if (step < 0 || step > total_steps) throw std::out_of_range("cosine_lr: step outside [0, T]");
  return lr0 * (1.0 + std::cos(M_PI * static_cast<double>(step) / total_steps)) / 2.0;
}

DiffusionModel::DiffusionModel(const DenoiserSpec& s, int num_classes, int resolution_,
                               std::uint64_t seed, const NoiseSchedule& schedule)
    : spec(s),
      sched(schedule),
      unet(s, seed),
      encoder([&] {
        nn::Rng r(nn::derive_seed(seed, 0xce));
        return ClassEncoder(num_classes, s.d_cond, r);
      }()),
      resolution(resolution_) {}

std::vector<nn::Param*> DiffusionModel::component_params(Component c) {
  return c == Component::class_encoder ? encoder.params() : unet.params();
}

std::vector<const nn::Param*> DiffusionModel::component_params(Component c) const {
  auto ps = const_cast<DiffusionModel*>(this)->component_params(c);
  return {ps.begin(), ps.end()};
}

void dataset_to_tensor(const data::LabeledDataset& ds, const std::vector<size_t>& indices,
                       nn::Tensor& x, std::vector<int>& labels) {
  if (indices.empty()) throw std::invalid_argument("dataset_to_tensor: empty selection");
  const auto& first = ds.images[indices[0]];
  x = nn::Tensor({static_cast<int>(indices.size()), first.channels, first.height, first.width});
  labels.clear();
  const std::int64_t per = static_cast<std::int64_t>(first.channels) * first.height * first.width;
  for (size_t i = 0; i < indices.size(); ++i) {
    const auto& img = ds.images[indices[i]];
    if (static_cast<std::int64_t>(img.values.size()) != per)
      throw std::invalid_argument("dataset_to_tensor: inconsistent image shapes");
    std::copy(img.values.begin(), img.values.end(), x.data() + static_cast<std::int64_t>(i) * per);
    labels.push_back(ds.labels[indices[i]]);
  }
}

DenoiseBatch make_denoise_batch(const ClassEncoder& enc, const NoiseSchedule& sched,
                                const nn::Tensor& x0, const std::vector<int>& labels,
                                double uncond_prob, nn::Rng& rng) {
  if (uncond_prob < 0.0 || uncond_prob > 1.0)
    throw std::invalid_argument("make_denoise_batch: uncond_prob outside [0,1]");
  const int n = x0.dim(0);
  if (n == 0) throw std::invalid_argument("make_denoise_batch: empty batch");
  const std::int64_t per = x0.size() / n;
  const int d_cond = enc.d_cond();

  DenoiseBatch b;
  b.eps = nn::Tensor(x0.shape());
  b.t.resize(static_cast<size_t>(n));
  b.cond = nn::Tensor({n, d_cond});
  b.cond_source.resize(static_cast<size_t>(n));

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> tdist(0, sched.T - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  b.x_t = nn::Tensor(x0.shape());
  for (int s = 0; s < n; ++s) {
    const int t = tdist(rng);
    b.t[static_cast<size_t>(s)] = t;
    const double sa = std::sqrt(sched.alpha_bars[static_cast<size_t>(t)]);
    const double sb = std::sqrt(1.0 - sched.alpha_bars[static_cast<size_t>(t)]);
    for (std::int64_t i = 0; i < per; ++i) {
      const double e = gauss(rng);
      b.eps[static_cast<std::int64_t>(s) * per + i] = e;
      b.x_t[static_cast<std::int64_t>(s) * per + i] =
          sa * x0[static_cast<std::int64_t>(s) * per + i] + sb * e;
    }
    const bool drop = unif(rng) < uncond_prob;
    b.cond_source[static_cast<size_t>(s)] = drop ? -1 : labels[static_cast<size_t>(s)];
    if (drop) {
      for (int j = 0; j < d_cond; ++j)
        b.cond[static_cast<std::int64_t>(s) * d_cond + j] = enc.null_embedding()[j];
    } else {
      const auto row = enc.encode(labels[static_cast<size_t>(s)]);
      for (int j = 0; j < d_cond; ++j)
        b.cond[static_cast<std::int64_t>(s) * d_cond + j] = row[static_cast<size_t>(j)];
    }
  }
  return b;
}

double mse_loss(const nn::Tensor& pred, const nn::Tensor& target, nn::Tensor* dpred) {
  if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
  const double inv = 1.0 / static_cast<double>(pred.size());
  double loss = 0.0;
  if (dpred) *dpred = nn::Tensor(pred.shape());
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    loss += d * d;
    if (dpred) (*dpred)[i] = 2.0 * d * inv;
  }
  return loss * inv;
}

double denoise_loss(UNet& unet, ClassEncoder& enc, const NoiseSchedule& sched,
                    const nn::Tensor& x0, const std::vector<int>& labels, double uncond_prob,
                    nn::Rng& rng, bool with_grad) {
  DenoiseBatch b = make_denoise_batch(enc, sched, x0, labels, uncond_prob, rng);
  nn::Tensor pred = unet.forward(b.x_t, b.t, sched.T, b.cond, with_grad);
  nn::Tensor dpred;
  const double loss = mse_loss(pred, b.eps, with_grad ? &dpred : nullptr);
  if (with_grad) {
    nn::Tensor dcond = unet.backward(dpred);
    const int d_cond = enc.d_cond();
    for (size_t s = 0; s < b.cond_source.size(); ++s) {
      const double* row = dcond.data() + static_cast<std::int64_t>(s) * d_cond;
      if (b.cond_source[s] < 0) enc.accumulate_null_grad(row);
      else enc.accumulate_grad(b.cond_source[s], row);
    }
  }
  return loss;
}

std::vector<EpochRecord> train_component(DiffusionModel& model, Component target,
                                         const TrainConfig& cfg, const data::LabeledDataset& data,
                                         const std::string& out_dir) {
  if (data.size() == 0) throw std::invalid_argument("train_component: empty dataset");
  std::filesystem::create_directories(out_dir);

  std::vector<nn::Param*> trainable = model.component_params(target);
  nn::AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  acfg.clip_norm = cfg.clip_norm;
  nn::Adam opt(trainable, acfg);

  // All grads get zeroed each step, also for the frozen component.
  std::vector<nn::Param*> all = model.unet.params();
  {
    auto ep = model.encoder.params();
    all.insert(all.end(), ep.begin(), ep.end());
  }

  const long steps_per_epoch =
      (static_cast<long>(data.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = steps_per_epoch * cfg.epochs;
  const std::string fp = fingerprint_string(cfg.describe() + "|" + model.spec.describe());

  std::vector<EpochRecord> records;
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    nn::Rng erng(nn::derive_seed(cfg.seed, 0x7261696e, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), erng);
    double loss_sum = 0.0;
    long batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::vector<size_t> idx(order.begin() + static_cast<long>(start),
                              order.begin() + static_cast<long>(end));
      nn::Tensor x;
      std::vector<int> labels;
      dataset_to_tensor(data, idx, x, labels);
      for (nn::Param* p : all) p->grad.set_zero();
      loss_sum += denoise_loss(model.unet, model.encoder, model.sched, x, labels,
                               cfg.uncond_prob, erng, /*with_grad=*/true);
      opt.step(cosine_lr(step, total_steps, cfg.lr));
      ++step;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.avg_loss = loss_sum / static_cast<double>(batches);
    rec.lr = cosine_lr(step, total_steps, cfg.lr);
    rec.checkpoint_path =
        (std::filesystem::path(out_dir) / (to_string(target) + "_epoch_" + std::to_string(epoch) +
                                           ".ckpt"))
            .string();
    CheckpointMeta meta;
    meta.component = target;
    meta.epoch = epoch;
    meta.config_fingerprint = fp;
    std::vector<const nn::Param*> cps(trainable.begin(), trainable.end());
    save_checkpoint(rec.checkpoint_path, cps, meta);
    records.push_back(rec);
  }
  return records;
}

}  // namespace casgen::diffusion
