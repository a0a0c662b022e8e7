#ifndef ROAM_UNET_HPP
#define ROAM_UNET_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "roam/layers.hpp"
#include "roam/mixup.hpp"
#include "roam/types.hpp"

namespace roam {

/// Encoder-decoder segmentation net with named injection points.
///
/// Stages, in forward order (widths 32/64/128; injection cut BEFORE each):
///   0 INPUT       stem    conv3x3 1->32          full res
///   1 ENC1        enc1    conv3x3 32->32 + pool  full res -> 1/2  (skip1 tee)
///   2 ENC2        enc2    conv3x3 32->64 + pool  1/2 -> 1/4       (skip2 tee)
///   3 BOTTLENECK  bott    conv3x3 64->128        1/4
///   4 DEC1        up + cat(skip2) + conv3x3 192->64   1/4 -> 1/2
///   5 DEC2        up + cat(skip1) + conv3x3 96->32    1/2 -> full
///   6 LAST        classifier conv1x1 32->C
///
/// forward_to(kappa) runs stages [0, kappa); forward_from(kappa) runs
/// [kappa, end). Both are partitions of the one stage loop, so composing
/// them is the plain forward pass with an identical op sequence. Every
/// conv/norm runs one sample at a time, so a sample's arithmetic does not
/// depend on its batch neighbours.
template <typename Scalar>
struct InjectableNet {
  using SkipStore = std::map<std::string, Tensor4<Scalar>>;

  static constexpr int kStages = 7;
  static constexpr int kWidth1 = 32, kWidth2 = 64, kWidth3 = 128;

  int num_classes = 0;
  bool train_mode = false;

  Conv2d<Scalar> conv_stem, conv_enc1, conv_enc2, conv_bott, conv_dec1, conv_dec2, conv_cls;
  InstanceNorm<Scalar> norm_stem, norm_enc1, norm_enc2, norm_bott, norm_dec1, norm_dec2;
  ReLU<Scalar> relu_stem, relu_enc1, relu_enc2, relu_bott, relu_dec1, relu_dec2;
  MaxPool2x2<Scalar> pool1, pool2;
  Upsample2x<Scalar> up1, up2;

  // Most recent forward's mixing decisions; backward routes through them.
  MixupPlan fwd_plan;
  int fwd_cut = 0;
  SkipStore last_downstream_skips_;  // store as seen by the resumed pass

  InjectableNet() = default;
  explicit InjectableNet(int classes)
      : num_classes(classes),
        conv_stem(1, kWidth1, 3),
        conv_enc1(kWidth1, kWidth1, 3),
        conv_enc2(kWidth1, kWidth2, 3),
        conv_bott(kWidth2, kWidth3, 3),
        conv_dec1(kWidth3 + kWidth2, kWidth2, 3),
        conv_dec2(kWidth2 + kWidth1, kWidth1, 3),
        conv_cls(kWidth1, classes, 1),
        norm_stem(kWidth1),
        norm_enc1(kWidth1),
        norm_enc2(kWidth2),
        norm_bott(kWidth3),
        norm_dec1(kWidth2),
        norm_dec2(kWidth1) {}

  void set_train(bool t) { train_mode = t; }

  void init_params(Rng& rng) {
    conv_stem.init_xavier(rng);
    conv_enc1.init_xavier(rng);
    conv_enc2.init_xavier(rng);
    conv_bott.init_xavier(rng);
    conv_dec1.init_xavier(rng);
    conv_dec2.init_xavier(rng);
    conv_cls.init_xavier(rng);
  }

  static int stage_of(LayerId kappa) {
    const int s = static_cast<int>(kappa);
    if (s < 0 || s >= kStages) fail(ErrorCode::UnknownLayer, std::string("not an injection point: ") + to_string(kappa));
    return s;
  }

  /// Channel width of the activation flowing into stage `kappa`.
  static int cut_channels(LayerId kappa) {
    switch (stage_of(kappa)) {
      case 0: return 1;
      case 1: return kWidth1;
      case 2: return kWidth1;
      case 3: return kWidth2;
      case 4: return kWidth3;
      case 5: return kWidth2;
      case 6: return kWidth1;
    }
    return 0;
  }

  /// Skips a resumed pass must find in the store: produced before the cut,
  /// consumed at or after it.
  static std::vector<std::string> required_skips(LayerId kappa) {
    const int cut = stage_of(kappa);
    std::vector<std::string> need;
    if (1 < cut && cut <= 5) need.push_back("skip1");  // produced at 1, consumed at 5
    if (2 < cut && cut <= 4) need.push_back("skip2");  // produced at 2, consumed at 4
    return need;
  }

  // -- stage loop -----------------------------------------------------------

  /// Runs stages [from, to) in place. The single loop shared by forward,
  /// forward_to, and forward_from is what makes two-pass composition
  /// bit-exact.
  void run_stages(Tensor4<Scalar>& h, SkipStore& skips, int from, int to) {
    const bool c = train_mode;  // caches are only needed for backward
    for (int s = from; s < to; ++s) {
      switch (s) {
        case 0:
          h = relu_stem.forward(norm_stem.forward(conv_stem.forward(h, c), train_mode, c, train_mode), c);
          break;
        case 1:
          h = relu_enc1.forward(norm_enc1.forward(conv_enc1.forward(h, c), train_mode, c, train_mode), c);
          skips["skip1"] = h;
          h = pool1.forward(h, c);
          break;
        case 2:
          h = relu_enc2.forward(norm_enc2.forward(conv_enc2.forward(h, c), train_mode, c, train_mode), c);
          skips["skip2"] = h;
          h = pool2.forward(h, c);
          break;
        case 3:
          h = relu_bott.forward(norm_bott.forward(conv_bott.forward(h, c), train_mode, c, train_mode), c);
          break;
        case 4: {
          auto it = skips.find("skip2");
          if (it == skips.end()) fail(ErrorCode::MissingSkip, "skip2 absent from store");
          h = concat_channels(up1.forward(h), it->second);
          h = relu_dec1.forward(norm_dec1.forward(conv_dec1.forward(h, c), train_mode, c, train_mode), c);
          break;
        }
        case 5: {
          auto it = skips.find("skip1");
          if (it == skips.end()) fail(ErrorCode::MissingSkip, "skip1 absent from store");
          h = concat_channels(up2.forward(h), it->second);
          h = relu_dec2.forward(norm_dec2.forward(conv_dec2.forward(h, c), train_mode, c, train_mode), c);
          break;
        }
        case 6:
          h = conv_cls.forward(h, c);
          break;
      }
    }
  }

  // -- public passes --------------------------------------------------------

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x) {
    Tensor4<Scalar> h = x;
    SkipStore skips;
    run_stages(h, skips, 0, kStages);
    fwd_plan = MixupPlan{};
    fwd_plan.permutation = identity_permutation(x.b);
    fwd_cut = 0;
    last_downstream_skips_ = std::move(skips);
    return h;
  }

  std::pair<Tensor4<Scalar>, SkipStore> forward_to(const Tensor4<Scalar>& x, LayerId kappa) {
    const int cut = stage_of(kappa);
    Tensor4<Scalar> h = x;
    SkipStore skips;
    run_stages(h, skips, 0, cut);
    return {std::move(h), std::move(skips)};
  }

  Tensor4<Scalar> forward_from(Tensor4<Scalar> h, SkipStore skips, LayerId kappa) {
    const int cut = stage_of(kappa);
    if (h.c != cut_channels(kappa))
      fail(ErrorCode::ShapeMismatch, std::string("activation has ") + std::to_string(h.c) +
                                         " channels; " + to_string(kappa) + " expects " +
                                         std::to_string(cut_channels(kappa)));
    for (const std::string& name : required_skips(kappa)) {
      auto it = skips.find(name);
      if (it == skips.end()) fail(ErrorCode::MissingSkip, name + " required to resume from " + to_string(kappa));
      const Tensor4<Scalar>& sk = it->second;
      // h sits at 1/2 res for cuts 2 and 5, at 1/4 for cuts 3 and 4;
      // skip1 lives at full res, skip2 at 1/2.
      const int h_scale = (cut == 2 || cut == 5) ? 2 : 4;
      const int scale = (name == "skip1") ? h_scale : h_scale / 2;
      if (sk.b != h.b || sk.h != scale * h.h || sk.w != scale * h.w)
        fail(ErrorCode::ShapeMismatch, name + " shape inconsistent with the resumed activation");
    }
    run_stages(h, skips, cut, kStages);
    last_downstream_skips_ = std::move(skips);
    return h;
  }

  /// Algorithm: run to the cut, mix activations (and, per policy, every
  /// stored skip) with the plan's lambda' and permutation, resume, and mix
  /// the labels identically. PASSTHROUGH short-circuits to the plain pass.
  std::pair<Tensor4<Scalar>, SoftLabelBatch<Scalar>> mixed_forward(const Tensor4<Scalar>& x,
                                                                   const SoftLabelBatch<Scalar>& y,
                                                                   const MixupPlan& plan) {
    validate_plan(plan);
    if (y.data.b != x.b) fail(ErrorCode::ShapeMismatch, "labels and images disagree on batch size");
    if (plan.is_passthrough()) {
      Tensor4<Scalar> logits = forward(x);
      return {std::move(logits), y};
    }
    if (static_cast<int>(plan.permutation.size()) != x.b)
      fail(ErrorCode::ShapeMismatch, "plan permutation length differs from batch size");
    const int cut = stage_of(plan.kappa);
    auto [h, skips] = forward_to(x, plan.kappa);
    h = mix(h, plan);
    if (plan.mix_skips)
      for (auto& [name, sk] : skips) sk = mix(sk, plan);
    run_stages(h, skips, cut, kStages);
    fwd_plan = plan;
    fwd_cut = cut;
    last_downstream_skips_ = std::move(skips);
    return {std::move(h), mix(y, plan)};
  }

  // -- backward -------------------------------------------------------------

  /// Backpropagates through the most recent (mixed_)forward; accumulates
  /// parameter gradients and returns the input gradient.
  Tensor4<Scalar> backward(const Tensor4<Scalar>& d_logits) {
    Tensor4<Scalar> d = d_logits;
    Tensor4<Scalar> d_skip1, d_skip2;
    bool have_ds1 = false, have_ds2 = false;
    for (int s = kStages - 1; s >= fwd_cut; --s)
      backward_stage(s, d, d_skip1, have_ds1, d_skip2, have_ds2);
    if (!fwd_plan.is_passthrough()) {
      d = mix_backward(d, fwd_plan);
      if (fwd_plan.mix_skips) {
        // Only gradients that cross the cut belong to mixed skips.
        if (have_ds1 && 1 < fwd_cut && fwd_cut <= 5) d_skip1 = mix_backward(d_skip1, fwd_plan);
        if (have_ds2 && 2 < fwd_cut && fwd_cut <= 4) d_skip2 = mix_backward(d_skip2, fwd_plan);
      }
    }
    for (int s = fwd_cut - 1; s >= 0; --s)
      backward_stage(s, d, d_skip1, have_ds1, d_skip2, have_ds2);
    return d;
  }

  void backward_stage(int s, Tensor4<Scalar>& d, Tensor4<Scalar>& d_skip1, bool& have_ds1,
                      Tensor4<Scalar>& d_skip2, bool& have_ds2) {
    switch (s) {
      case 6:
        d = conv_cls.backward(d);
        break;
      case 5: {
        d = conv_dec2.backward(norm_dec2.backward(relu_dec2.backward(d)));
        auto [d_up, d_sk] = split_channels(d, kWidth2);
        accumulate(d_skip1, have_ds1, d_sk);
        d = up2.backward(d_up);
        break;
      }
      case 4: {
        d = conv_dec1.backward(norm_dec1.backward(relu_dec1.backward(d)));
        auto [d_up, d_sk] = split_channels(d, kWidth3);
        accumulate(d_skip2, have_ds2, d_sk);
        d = up1.backward(d_up);
        break;
      }
      case 3:
        d = conv_bott.backward(norm_bott.backward(relu_bott.backward(d)));
        break;
      case 2: {
        Tensor4<Scalar> d_a = pool2.backward(d);
        if (have_ds2) d_a.v += d_skip2.v;
        d = conv_enc2.backward(norm_enc2.backward(relu_enc2.backward(d_a)));
        break;
      }
      case 1: {
        Tensor4<Scalar> d_a = pool1.backward(d);
        if (have_ds1) d_a.v += d_skip1.v;
        d = conv_enc1.backward(norm_enc1.backward(relu_enc1.backward(d_a)));
        break;
      }
      case 0:
        d = conv_stem.backward(norm_stem.backward(relu_stem.backward(d)));
        break;
    }
  }

  static void accumulate(Tensor4<Scalar>& acc, bool& have, Tensor4<Scalar>& delta) {
    if (!have) {
      acc = std::move(delta);
      have = true;
    } else {
      acc.v += delta.v;
    }
  }

  // -- parameters -----------------------------------------------------------

  std::vector<ParamRef<Scalar>> params() {
    std::vector<ParamRef<Scalar>> out;
    auto conv = [&out](const char* name, Conv2d<Scalar>& c) {
      out.push_back({std::string(name) + ".weight", &c.weight, &c.d_weight});
      out.push_back({std::string(name) + ".bias", &c.bias, &c.d_bias});
    };
    auto norm = [&out](const char* name, InstanceNorm<Scalar>& n) {
      out.push_back({std::string(name) + ".gamma", &n.gamma, &n.d_gamma});
      out.push_back({std::string(name) + ".beta", &n.beta, &n.d_beta});
    };
    conv("conv_stem", conv_stem);
    norm("norm_stem", norm_stem);
    conv("conv_enc1", conv_enc1);
    norm("norm_enc1", norm_enc1);
    conv("conv_enc2", conv_enc2);
    norm("norm_enc2", norm_enc2);
    conv("conv_bott", conv_bott);
    norm("norm_bott", norm_bott);
    conv("conv_dec1", conv_dec1);
    norm("norm_dec1", norm_dec1);
    conv("conv_dec2", conv_dec2);
    norm("norm_dec2", norm_dec2);
    conv("conv_cls", conv_cls);
    return out;
  }

  std::vector<StateRef<Scalar>> state() {
    std::vector<StateRef<Scalar>> out;
    auto norm = [&out](const char* name, InstanceNorm<Scalar>& n) {
      out.push_back({std::string(name) + ".running_mean", &n.running_mean});
      out.push_back({std::string(name) + ".running_var", &n.running_var});
    };
    norm("norm_stem", norm_stem);
    norm("norm_enc1", norm_enc1);
    norm("norm_enc2", norm_enc2);
    norm("norm_bott", norm_bott);
    norm("norm_dec1", norm_dec1);
    norm("norm_dec2", norm_dec2);
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) p.grad->setZero();
  }

  std::int64_t param_count() {
    std::int64_t n = 0;
    for (auto& p : params()) n += p.value->size();
    return n;
  }

  std::string arch_descriptor() const {
    return "unet2d w32-64-128 d2 classes=" + std::to_string(num_classes);
  }
};

using InjectableNetF = InjectableNet<float>;
using InjectableNetD = InjectableNet<double>;

}  // namespace roam

#endif  // ROAM_UNET_HPP
