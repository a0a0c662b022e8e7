#ifndef ROAM_TRAINER_HPP
#define ROAM_TRAINER_HPP

#include <cstdint>
#include <vector>

#include "roam/checkpoint.hpp"
#include "roam/config.hpp"
#include "roam/dataset.hpp"
#include "roam/tensor.hpp"
#include "roam/unet.hpp"

namespace roam {

/// One optimizer step's bookkeeping. `iter` counts steps across the whole
/// run; `epoch` is the global epoch the step belongs to.
struct IterationEvent {
  int epoch = 0;
  int iter = 0;
  LayerId kappa = LayerId::PASSTHROUGH;
  double lambda_prime = 1.0;
  double ce = 0.0, mse = 0.0, total = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double val_dice = 0.0;
  bool selectable = false;  // inside the best-model selection window
};

struct RunRecord {
  std::vector<IterationEvent> events;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_dice = 0.0;
  std::int64_t guess_calls = 0;  // pseudo-label forward passes
};

/// `best` maximizes validation Dice over the selectable epochs (ties break
/// to the earliest); `final` is the last epoch. Modes without a selection
/// window copy `final` into `best`.
struct TrainResult {
  Mode mode = Mode::LOWER_BOUND;
  RunRecord record;
  Checkpoint best;
  Checkpoint final;

  /// The checkpoint the mode's protocol evaluates: bounds trained for a
  /// fixed budget take `final`; further-trained models take `best`.
  const Checkpoint& selected() const {
    return (mode == Mode::LOWER_BOUND || mode == Mode::SUP_ROAM_LB) ? final : best;
  }
};

/// Adam with L2 weight decay folded into the gradient. Moments are keyed by
/// parameter order, so one instance must stay with one net.
class Adam {
 public:
  Adam(double lr, double weight_decay) : lr_(lr), wd_(weight_decay) {}

  void step(std::vector<ParamRef<float>> params);
  void reset();

 private:
  double lr_, wd_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  std::vector<ArrayX<float>> m_, v_;
};

/// Draws index batches from a shuffled order, reshuffling on wrap-around.
class CyclingSampler {
 public:
  CyclingSampler(int n, Rng& rng);
  std::vector<int> next(int k);

 private:
  Rng& rng_;
  std::vector<int> order_;
  std::size_t pos_ = 0;
};

/// Supervised training on the labeled split for pretrain_epochs; the
/// returned checkpoint carries the advanced RNG stream states. With
/// pretrain_epochs = 0 this is just the initialized model.
Checkpoint pretrain(const RunConfig& cfg, const Dataset& labeled);

/// The three continuation protocols. Each restores `start` (parameters,
/// running statistics, RNG streams) into a fresh net with a fresh optimizer.
TrainResult train_ssl_roam(const RunConfig& cfg, const Checkpoint& start, const SplitResult& splits);
TrainResult train_supervised_roam(const RunConfig& cfg, const Checkpoint& start, const SplitResult& splits);
TrainResult train_pseudo_baseline(const RunConfig& cfg, const Checkpoint& start, const SplitResult& splits);

/// Full protocol for cfg.mode: initialization, pretraining phase where the
/// mode has one, continuation, model selection.
TrainResult run_training(const RunConfig& cfg, const SplitResult& splits);

/// Eval-mode argmax predictions over a whole dataset, batched.
LabelMap predict_labels(InjectableNet<float>& net, const Dataset& ds, int batch_size);

/// Mean over samples of the per-sample mean foreground Dice.
double mean_validation_dice(InjectableNet<float>& net, const Dataset& ds, int batch_size);

/// Same, for a restored checkpoint.
double checkpoint_validation_dice(const Checkpoint& ckpt, const Dataset& ds, int classes,
                                  int batch_size);

/// Both datasets keep their labels; images must agree on geometry.
Dataset concat_datasets(const Dataset& a, const Dataset& b);

}  // namespace roam

#endif  // ROAM_TRAINER_HPP
