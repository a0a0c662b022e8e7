#include "roam/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "roam/losses.hpp"
#include "roam/metrics.hpp"
#include "roam/mixup.hpp"
#include "roam/pseudo_labels.hpp"
#include "roam/rng.hpp"

namespace roam {

// ---------------------------------------------------------------------------
// Optimizer

void Adam::step(std::vector<ParamRef<float>> params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.push_back(ArrayX<float>::Zero(p.value->size()));
      v_.push_back(ArrayX<float>::Zero(p.value->size()));
    }
  }
  if (m_.size() != params.size())
    fail(ErrorCode::IncompatibleCheckpoint, "optimizer moments disagree with parameter census");
  ++t_;
  const float bc1 = static_cast<float>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const float bc2 = static_cast<float>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float lr = static_cast<float>(lr_), wd = static_cast<float>(wd_);
  const float eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ArrayX<float>& p = *params[i].value;
    if (m_[i].size() != p.size())
      fail(ErrorCode::IncompatibleCheckpoint, "optimizer moments disagree with parameter shape");
    const ArrayX<float> g = *params[i].grad + wd * p;
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = b2 * v_[i] + (1.0f - b2) * g.square();
    p -= lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + eps);
  }
}

void Adam::reset() {
  m_.clear();
  v_.clear();
  t_ = 0;
}

// ---------------------------------------------------------------------------
// Sampling

CyclingSampler::CyclingSampler(int n, Rng& rng) : rng_(rng), order_(identity_permutation(n)) {
  if (n < 1) fail(ErrorCode::EmptyDataset, "sampler over an empty dataset");
  rng_.shuffle(order_);
}

std::vector<int> CyclingSampler::next(int k) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    if (pos_ == order_.size()) {
      rng_.shuffle(order_);
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation helpers

LabelMap predict_labels(InjectableNet<float>& net, const Dataset& ds, int batch_size) {
  if (ds.size() == 0) fail(ErrorCode::EmptyDataset, "predict over an empty dataset");
  if (batch_size < 1) fail(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
  const bool was_train = net.train_mode;
  net.set_train(false);
  LabelMap out(static_cast<int>(ds.size()), ds.h, ds.w);
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(ds.h) * ds.w;
  for (std::size_t at = 0; at < ds.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(ds.size(), at + static_cast<std::size_t>(batch_size));
    std::vector<int> idx;
    for (std::size_t i = at; i < end; ++i) idx.push_back(static_cast<int>(i));
    const ImageBatchF x = gather_images(ds, idx);
    Tensor4f logits = net.forward(x.data);
    const LabelMap am = argmax_labels(SoftLabelBatch<float>(std::move(logits), net.num_classes));
    std::copy(am.v.begin(), am.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(at) * plane);
  }
  net.set_train(was_train);
  return out;
}

double mean_validation_dice(InjectableNet<float>& net, const Dataset& ds, int batch_size) {
  const LabelMap pred = predict_labels(net, ds, batch_size);
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(ds.h) * ds.w;
  LabelMap p1(1, ds.h, ds.w), g1(1, ds.h, ds.w);
  double sum = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!ds.labeled(i)) fail(ErrorCode::EmptyDataset, "validation sample lacks a label");
    std::copy_n(pred.v.begin() + static_cast<std::ptrdiff_t>(i) * plane, plane, p1.v.begin());
    std::copy_n(ds.labels[i].begin(), plane, g1.v.begin());
    sum += dice(p1, g1, ds.classes).mean_foreground;
  }
  return sum / static_cast<double>(ds.size());
}

double checkpoint_validation_dice(const Checkpoint& ckpt, const Dataset& ds, int classes,
                                  int batch_size) {
  InjectableNet<float> net(classes);
  restore(net, ckpt);
  return mean_validation_dice(net, ds, batch_size);
}

Dataset concat_datasets(const Dataset& a, const Dataset& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.h != b.h || a.w != b.w || a.classes != b.classes)
    fail(ErrorCode::ShapeMismatch, "datasets disagree on geometry or classes");
  Dataset out = a;
  out.images.insert(out.images.end(), b.images.begin(), b.images.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

// ---------------------------------------------------------------------------
// Engine

namespace {

int iterations_for(std::size_t n, int batch) {
  return static_cast<int>((n + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
}

struct Engine {
  const RunConfig& cfg;
  InjectableNet<float> net;
  RngPool pool;
  Adam adam;
  RunRecord record;
  int epoch = 0;  // completed epochs so far
  int iter = 0;   // completed optimizer steps so far
  Checkpoint best;
  bool have_best = false;

  explicit Engine(const RunConfig& c)
      : cfg(c), net(c.data.classes), pool(c.seed), adam(c.lr, c.weight_decay) {
    if (c.batch_size < 1) fail(ErrorCode::ConfigInvalid, "batch_size must be >= 1");
    if (c.pretrain_epochs < 0 || c.train_epochs < 0)
      fail(ErrorCode::ConfigInvalid, "epoch budgets must be >= 0");
    if (c.data.classes < 2) fail(ErrorCode::ConfigInvalid, "need at least two classes");
    if (c.kappa_set.empty()) fail(ErrorCode::EmptyKappaSet, "kappa_set must not be empty");
    net.init_params(pool.stream("init"));
    net.set_train(true);
  }

  void restore_from(const Checkpoint& ckpt) {
    restore(net, ckpt);
    pool.restore(ckpt.rng_streams);
    epoch = ckpt.epoch;
  }

  Checkpoint snap(int at_epoch) { return snapshot(net, at_epoch, pool.serialize_all()); }

  void validate_epoch(const Dataset& val, bool selectable) {
    const double d = mean_validation_dice(net, val, cfg.batch_size);
    record.epochs.push_back({epoch, d, selectable});
    if (selectable && (!have_best || d > record.best_val_dice)) {
      record.best_val_dice = d;
      record.best_epoch = epoch;
      best = snap(epoch);
      have_best = true;
    }
  }

  void end_epoch(const Dataset* val, bool selectable) {
    if (val) validate_epoch(*val, selectable);
    ++epoch;
  }

  /// Plain or ROAM-mixed supervised epochs over one labeled dataset.
  void supervised_phase(const Dataset& train, const Dataset* val, int epochs, bool roam_mix,
                        bool selectable) {
    if (train.size() == 0) fail(ErrorCode::EmptyDataset, "supervised phase without data");
    if (epochs == 0) return;  // a zero-epoch phase must not consume any stream draws
    const int B = cfg.batch_size;
    const int iters = iterations_for(train.size(), B);
    CyclingSampler sampler(static_cast<int>(train.size()), pool.stream("shuffle_labeled"));
    for (int e = 0; e < epochs; ++e) {
      net.set_train(true);
      for (int it = 0; it < iters; ++it) {
        const std::vector<int> idx = sampler.next(B);
        const ImageBatchF x = gather_images(train, idx);
        const SoftLabelBatchF y = one_hot_encode<float>(gather_labels(train, idx), train.classes);

        IterationEvent ev;
        ev.epoch = epoch;
        ev.iter = iter++;
        Tensor4f logits;
        SoftLabelBatchF targets;
        if (roam_mix) {
          const MixupPlan plan = make_plan(pool, cfg.kappa_set, cfg.alpha, B, B, cfg.concatenate,
                                           cfg.mix_skips, cfg.per_sample_lambda);
          auto [lg, ym] = net.mixed_forward(x.data, y, plan);
          logits = std::move(lg);
          targets = std::move(ym);
          ev.kappa = plan.kappa;
          ev.lambda_prime = plan.lambda_prime;
        } else {
          logits = net.forward(x.data);
          targets = y;
        }
        ev.ce = soft_cross_entropy(logits, targets);
        ev.total = ev.ce;  // supervised modes propagate L_CE alone
        const Tensor4f d = soft_cross_entropy_backward(logits, targets);
        net.zero_grad();
        net.backward(d);
        adam.step(net.params());
        record.events.push_back(ev);
      }
      end_epoch(val, selectable);
    }
  }

  /// Algorithm: per step, guess (and optionally sharpen) pseudo labels for
  /// an unlabeled batch, concatenate labeled-first, mix at a random layer,
  /// and step on CE + beta * MSE.
  void ssl_phase(const Dataset& labeled, const Dataset& unlabeled, const Dataset* val, int epochs,
                 bool selectable) {
    if (labeled.size() == 0) fail(ErrorCode::EmptyDataset, "ssl phase without labeled data");
    if (unlabeled.size() == 0) fail(ErrorCode::NoUnlabeledData, "ssl phase without unlabeled data");
    if (epochs == 0) return;  // a zero-epoch phase must not consume any stream draws
    const int B = cfg.batch_size;
    const int iters = iterations_for(std::max(labeled.size(), unlabeled.size()), B);
    CyclingSampler s_l(static_cast<int>(labeled.size()), pool.stream("shuffle_labeled"));
    CyclingSampler s_u(static_cast<int>(unlabeled.size()), pool.stream("shuffle_unlabeled"));
    for (int e = 0; e < epochs; ++e) {
      net.set_train(true);
      for (int it = 0; it < iters; ++it) {
        const std::vector<int> idx_l = s_l.next(B);
        const ImageBatchF x_l = gather_images(labeled, idx_l);
        const SoftLabelBatchF y_l =
            one_hot_encode<float>(gather_labels(labeled, idx_l), labeled.classes);
        const ImageBatchF x_u = gather_images(unlabeled, s_u.next(B));

        SoftLabelBatchF y_u = guess_labels(
            [this](const Tensor4f& t) {
              net.set_train(false);
              Tensor4f p = softmax_channels(net.forward(t));
              net.set_train(true);
              return p;
            },
            x_u);
        ++record.guess_calls;
        if (cfg.sharpen) y_u = sharpen(y_u, cfg.T);

        auto [x, y, marker] = concat_batches(x_l, y_l, x_u, y_u);
        const MixupPlan plan = make_plan(pool, cfg.kappa_set, cfg.alpha, x.batch(), marker,
                                         cfg.concatenate, cfg.mix_skips, cfg.per_sample_lambda);
        auto [logits, y_mixed] = net.mixed_forward(x.data, y, plan);
        auto [p_l, t_l, p_u, t_u] = split_predictions(logits, y_mixed, marker);
        const LossTerms terms = total_loss(p_l, t_l, p_u, t_u, cfg.beta);
        auto [d_l, d_u] = total_loss_backward(p_l, t_l, p_u, t_u, cfg.beta);
        const Tensor4f d = join_gradients(d_l, d_u);
        net.zero_grad();
        net.backward(d);
        adam.step(net.params());
        record.events.push_back(
            {epoch, iter++, plan.kappa, plan.lambda_prime, terms.ce, terms.mse, terms.total});
      }
      end_epoch(val, selectable);
    }
  }

  /// One-time hard pseudo labels from the current model.
  Dataset pseudo_label(const Dataset& unlabeled) {
    const LabelMap guessed = predict_labels(net, unlabeled, cfg.batch_size);
    record.guess_calls += iterations_for(unlabeled.size(), cfg.batch_size);
    Dataset out = unlabeled;
    const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(out.h) * out.w;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.labels[i].assign(guessed.v.begin() + static_cast<std::ptrdiff_t>(i) * plane,
                           guessed.v.begin() + static_cast<std::ptrdiff_t>(i + 1) * plane);
    }
    return out;
  }

  TrainResult finish(Mode mode) {
    TrainResult out;
    out.mode = mode;
    out.final = snap(epoch);
    out.best = have_best ? best : out.final;
    out.record = std::move(record);
    return out;
  }
};

void require_classes_agree(const RunConfig& cfg, const SplitResult& splits) {
  if (splits.labeled.classes != cfg.data.classes)
    fail(ErrorCode::ConfigInvalid, "config declares " + std::to_string(cfg.data.classes) +
                                       " classes but the data holds " +
                                       std::to_string(splits.labeled.classes));
}

}  // namespace

// ---------------------------------------------------------------------------
// Public protocol entry points

Checkpoint pretrain(const RunConfig& cfg, const Dataset& labeled) {
  Engine eng(cfg);
  eng.supervised_phase(labeled, nullptr, cfg.pretrain_epochs, false, false);
  return eng.snap(eng.epoch);
}

TrainResult train_ssl_roam(const RunConfig& cfg, const Checkpoint& start,
                           const SplitResult& splits) {
  if (cfg.mode != Mode::SSL_ROAM)
    fail(ErrorCode::ConfigInvalid, "train_ssl_roam requires mode=SSL_ROAM");
  require_classes_agree(cfg, splits);
  Engine eng(cfg);
  eng.restore_from(start);
  eng.ssl_phase(splits.labeled, splits.unlabeled, &splits.validation, cfg.train_epochs, true);
  return eng.finish(cfg.mode);
}

TrainResult train_supervised_roam(const RunConfig& cfg, const Checkpoint& start,
                                  const SplitResult& splits) {
  require_classes_agree(cfg, splits);
  Engine eng(cfg);
  eng.restore_from(start);
  switch (cfg.mode) {
    case Mode::SUP_ROAM_LB:
      eng.supervised_phase(splits.labeled, &splits.validation, cfg.pretrain_epochs, true, false);
      break;
    case Mode::SUP_ROAM_UB:
      eng.supervised_phase(concat_datasets(splits.labeled, splits.unlabeled_with_labels),
                           &splits.validation, cfg.train_epochs, true, true);
      break;
    case Mode::FULLY_SUP_ROAM:
      eng.supervised_phase(concat_datasets(splits.labeled, splits.unlabeled_with_labels),
                           &splits.validation, cfg.pretrain_epochs + cfg.train_epochs, true, true);
      break;
    default:
      fail(ErrorCode::ConfigInvalid, "train_supervised_roam requires a SUP_* or FULLY_SUP mode");
  }
  return eng.finish(cfg.mode);
}

TrainResult train_pseudo_baseline(const RunConfig& cfg, const Checkpoint& start,
                                  const SplitResult& splits) {
  if (cfg.mode != Mode::SSL_PSEUDO_BASELINE)
    fail(ErrorCode::ConfigInvalid, "train_pseudo_baseline requires mode=SSL_PSEUDO_BASELINE");
  require_classes_agree(cfg, splits);
  if (splits.unlabeled.size() == 0)
    fail(ErrorCode::NoUnlabeledData, "pseudo baseline without unlabeled data");
  Engine eng(cfg);
  eng.restore_from(start);
  const Dataset pseudo = eng.pseudo_label(splits.unlabeled);
  eng.supervised_phase(concat_datasets(splits.labeled, pseudo), &splits.validation,
                       cfg.train_epochs, false, true);
  return eng.finish(cfg.mode);
}

TrainResult run_training(const RunConfig& cfg, const SplitResult& splits) {
  require_classes_agree(cfg, splits);
  Engine eng(cfg);
  const Dataset& lab = splits.labeled;
  const Dataset* val = &splits.validation;
  switch (cfg.mode) {
    case Mode::LOWER_BOUND:
      eng.supervised_phase(lab, val, cfg.pretrain_epochs, false, false);
      break;
    case Mode::UPPER_BOUND:
      eng.supervised_phase(lab, val, cfg.pretrain_epochs, false, false);
      eng.adam.reset();
      eng.supervised_phase(concat_datasets(lab, splits.unlabeled_with_labels), val,
                           cfg.train_epochs, false, true);
      break;
    case Mode::SSL_ROAM:
      eng.supervised_phase(lab, val, cfg.pretrain_epochs, false, false);
      eng.adam.reset();
      eng.ssl_phase(lab, splits.unlabeled, val, cfg.train_epochs, true);
      break;
    case Mode::SSL_PSEUDO_BASELINE: {
      if (splits.unlabeled.size() == 0)
        fail(ErrorCode::NoUnlabeledData, "pseudo baseline without unlabeled data");
      eng.supervised_phase(lab, val, cfg.pretrain_epochs, false, false);
      eng.adam.reset();
      const Dataset pseudo = eng.pseudo_label(splits.unlabeled);
      eng.supervised_phase(concat_datasets(lab, pseudo), val, cfg.train_epochs, false, true);
      break;
    }
    case Mode::SUP_ROAM_LB:
      eng.supervised_phase(lab, val, cfg.pretrain_epochs, true, false);
      break;
    case Mode::SUP_ROAM_UB:
      eng.supervised_phase(lab, val, cfg.pretrain_epochs, false, false);
      eng.adam.reset();
      eng.supervised_phase(concat_datasets(lab, splits.unlabeled_with_labels), val,
                           cfg.train_epochs, true, true);
      break;
    case Mode::FULLY_SUP_ROAM:
      eng.supervised_phase(concat_datasets(lab, splits.unlabeled_with_labels), val,
                           cfg.pretrain_epochs + cfg.train_epochs, true, true);
      break;
  }
  return eng.finish(cfg.mode);
}

}  // namespace roam
