#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>

#include "roam/mixup.hpp"
#include "roam/rng.hpp"
#include "roam/unet.hpp"
#include "test_util.hpp"

using namespace roam;

namespace {

Tensor4d random_tensor(Rng& rng, int b, int c, int h, int w) {
  Tensor4d t(b, c, h, w);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.v[i] = rng.uniform(-1.0, 1.0);
  return t;
}

SoftLabelBatch<double> random_labels(Rng& rng, int b, int c, int h, int w) {
  Tensor4d t(b, c, h, w);
  for (int bi = 0; bi < b; ++bi)
    for (int hi = 0; hi < h; ++hi)
      for (int wi = 0; wi < w; ++wi) {
        double sum = 0.0;
        for (int ci = 0; ci < c; ++ci) sum += (t.at(bi, ci, hi, wi) = rng.uniform_pos());
        for (int ci = 0; ci < c; ++ci) t.at(bi, ci, hi, wi) /= sum;
      }
  return {t, c};
}

MixupPlan nontrivial_plan(LayerId kappa, int b, bool mix_skips) {
  MixupPlan plan;
  plan.kappa = kappa;
  plan.lambda_prime = 0.7;
  plan.permutation.resize(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) plan.permutation[static_cast<std::size_t>(i)] = (i + 1) % b;
  plan.mix_skips = mix_skips;
  return plan;
}

double fd_slot(double* slot, const std::function<double()>& loss, double step = 1e-6) {
  const double saved = *slot;
  *slot = saved + step;
  const double up = loss();
  *slot = saved - step;
  const double down = loss();
  *slot = saved;
  return (up - down) / (2.0 * step);
}

bool close_rel(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

TEST_CASE("forward produces full-resolution logits with C channels") {
  InjectableNetD net(3);
  Rng rng(61);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 2, 1, 16, 16);
  Tensor4d logits = net.forward(x);
  CHECK(logits.b == 2);
  CHECK(logits.c == 3);
  CHECK(logits.h == 16);
  CHECK(logits.w == 16);
  CHECK(logits.v.isFinite().all());
}

TEST_CASE("parameter census is stable and every hidden cut is at least 32 wide") {
  InjectableNetD a(4), b(4);
  CHECK(a.param_count() == b.param_count());
  CHECK(a.param_count() > 200000);

  std::int64_t manual = 0;
  for (auto& p : a.params()) manual += p.value->size();
  CHECK(manual == a.param_count());
  CHECK(a.params().size() == 26);
  CHECK(a.state().size() == 12);

  for (LayerId k : kInjectionPoints)
    if (k != LayerId::INPUT) CHECK(a.cut_channels(k) >= 32);
  CHECK(a.arch_descriptor() == "unet2d w32-64-128 d2 classes=4");
}

TEST_CASE("two-pass composition reproduces the plain forward bit for bit") {
  Rng rng(62);
  InjectableNetD net(2);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 2, 1, 16, 16);

  for (bool train : {false, true}) {
    net.set_train(train);
    Tensor4d whole = net.forward(x);
    for (LayerId k : kInjectionPoints) {
      auto [h, skips] = net.forward_to(x, k);
      Tensor4d stitched = net.forward_from(std::move(h), std::move(skips), k);
      CHECK_MESSAGE((stitched.v - whole.v).abs().maxCoeff() == 0.0, to_string(k));
    }
  }
}

TEST_CASE("forward_to at INPUT returns x and an empty store; LAST carries both skips") {
  Rng rng(63);
  InjectableNetD net(2);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 1, 1, 16, 16);

  auto [h0, s0] = net.forward_to(x, LayerId::INPUT);
  CHECK((h0.v - x.v).abs().maxCoeff() == 0.0);
  CHECK(s0.empty());

  auto [hl, sl] = net.forward_to(x, LayerId::LAST);
  CHECK(hl.c == 32);
  CHECK(hl.h == 16);
  CHECK(sl.count("skip1") == 1);
  CHECK(sl.count("skip2") == 1);
  CHECK(sl.at("skip1").h == 16);
  CHECK(sl.at("skip2").h == 8);
}

TEST_CASE("forward_from validates the resume point") {
  Rng rng(64);
  InjectableNetD net(2);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 1, 1, 16, 16);

  auto [h, skips] = net.forward_to(x, LayerId::DEC1);
  CHECK_FAILS_WITH(ErrorCode::MissingSkip,
                   net.forward_from(h, InjectableNetD::SkipStore{}, LayerId::DEC1));

  Tensor4d wrong_c(1, 16, 4, 4);
  CHECK_FAILS_WITH(ErrorCode::ShapeMismatch, net.forward_from(wrong_c, skips, LayerId::DEC1));

  auto bad_skips = skips;
  bad_skips.at("skip1") = Tensor4d(1, 32, 8, 8);
  CHECK_FAILS_WITH(ErrorCode::ShapeMismatch, net.forward_from(h, bad_skips, LayerId::DEC1));

  CHECK_FAILS_WITH(ErrorCode::UnknownLayer, net.forward_to(x, LayerId::PASSTHROUGH));
}

TEST_CASE("zero activations through a zero-weight classifier yield zero logits") {
  Rng rng(65);
  InjectableNetD net(3);
  net.init_params(rng);
  net.conv_cls.weight.setZero();
  net.conv_cls.bias.setZero();
  Tensor4d h = Tensor4d::zeros(1, 32, 16, 16);
  Tensor4d logits = net.forward_from(h, InjectableNetD::SkipStore{}, LayerId::LAST);
  CHECK(logits.v.abs().maxCoeff() == 0.0);
}

TEST_CASE("an uninitialized net still produces finite zero logits") {
  InjectableNetD net(2);
  Tensor4d x = Tensor4d::zeros(1, 1, 16, 16);
  Tensor4d logits = net.forward(x);
  CHECK(logits.v.isFinite().all());
  CHECK(logits.v.abs().maxCoeff() == 0.0);
}

TEST_CASE("mixing at INPUT equals mixing the images by hand") {
  Rng rng(66);
  InjectableNetD net(2);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 3, 1, 16, 16);
  auto y = random_labels(rng, 3, 2, 16, 16);
  MixupPlan plan = nontrivial_plan(LayerId::INPUT, 3, false);

  auto [logits, y_mixed] = net.mixed_forward(x, y, plan);
  Tensor4d manual = net.forward(mix(x, plan));
  CHECK((logits.v - manual.v).abs().maxCoeff() == 0.0);
  CHECK((y_mixed.data.v - mix(y, plan).data.v).abs().maxCoeff() == 0.0);
}

TEST_CASE("PASSTHROUGH mixed_forward is the plain pass with untouched labels") {
  Rng rng(67);
  InjectableNetD net(2);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 2, 1, 16, 16);
  auto y = random_labels(rng, 2, 2, 16, 16);
  MixupPlan plan;  // defaults to PASSTHROUGH / identity
  plan.permutation = identity_permutation(2);
  auto [logits, y_out] = net.mixed_forward(x, y, plan);
  Tensor4d plain = net.forward(x);
  CHECK((logits.v - plain.v).abs().maxCoeff() == 0.0);
  CHECK((y_out.data.v - y.data.v).abs().maxCoeff() == 0.0);
}

TEST_CASE("a lambda' = 1 identity plan reproduces the plain pass at every cut") {
  Rng rng(68);
  InjectableNetD net(2);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 2, 1, 16, 16);
  auto y = random_labels(rng, 2, 2, 16, 16);
  Tensor4d plain = net.forward(x);
  for (LayerId k : kInjectionPoints) {
    MixupPlan plan;
    plan.kappa = k;
    plan.lambda_prime = 1.0;
    plan.permutation = identity_permutation(2);
    auto [logits, y_out] = net.mixed_forward(x, y, plan);
    CHECK_MESSAGE((logits.v - plain.v).abs().maxCoeff() == 0.0, to_string(k));
    CHECK((y_out.data.v - y.data.v).abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("skip policy: skips stay clean unless the plan mixes them") {
  Rng rng(69);
  InjectableNetD net(2);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 3, 1, 16, 16);
  auto y = random_labels(rng, 3, 2, 16, 16);

  auto [h_ref, skips_ref] = net.forward_to(x, LayerId::BOTTLENECK);

  MixupPlan plain_plan = nontrivial_plan(LayerId::BOTTLENECK, 3, false);
  net.mixed_forward(x, y, plain_plan);
  CHECK((net.last_downstream_skips_.at("skip1").v - skips_ref.at("skip1").v).abs().maxCoeff() == 0.0);
  CHECK((net.last_downstream_skips_.at("skip2").v - skips_ref.at("skip2").v).abs().maxCoeff() == 0.0);

  MixupPlan skip_plan = nontrivial_plan(LayerId::BOTTLENECK, 3, true);
  net.mixed_forward(x, y, skip_plan);
  CHECK((net.last_downstream_skips_.at("skip1").v - mix(skips_ref.at("skip1"), skip_plan).v)
            .abs()
            .maxCoeff() == 0.0);
  CHECK((net.last_downstream_skips_.at("skip2").v - mix(skips_ref.at("skip2"), skip_plan).v)
            .abs()
            .maxCoeff() == 0.0);
}

TEST_CASE("per-sample arithmetic: one sample's logits ignore its batchmates") {
  Rng rng(70);
  InjectableNetD net(2);
  net.init_params(rng);
  net.set_train(true);
  Tensor4d shared = random_tensor(rng, 1, 1, 16, 16);
  Tensor4d a(2, 1, 16, 16), b(2, 1, 16, 16);
  a.sample(0) = shared.sample(0);
  b.sample(0) = shared.sample(0);
  Tensor4d fill_a = random_tensor(rng, 1, 1, 16, 16);
  Tensor4d fill_b = random_tensor(rng, 1, 1, 16, 16);
  a.sample(1) = fill_a.sample(0);
  b.sample(1) = fill_b.sample(0);
  Tensor4d la = net.forward(a);
  Tensor4d lb = net.forward(b);
  CHECK((la.sample(0) - lb.sample(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("plain backward matches finite differences on sampled coordinates") {
  Rng rng(71);
  InjectableNetD net(2);
  net.init_params(rng);
  net.set_train(true);
  Tensor4d x = random_tensor(rng, 2, 1, 8, 8);
  Tensor4d g = random_tensor(rng, 2, 2, 8, 8);

  auto loss = [&]() { return (net.forward(x).v * g.v).sum(); };
  net.zero_grad();
  net.forward(x);
  Tensor4d dx = net.backward(g);

  for (int probe = 0; probe < 20; ++probe) {
    const Eigen::Index i = static_cast<Eigen::Index>(rng.bounded(static_cast<std::uint64_t>(x.size())));
    CHECK(close_rel(dx.v[i], fd_slot(&x.v[i], loss), 2e-4));
  }
  auto ps = net.params();
  for (int probe = 0; probe < 40; ++probe) {
    auto& p = ps[rng.bounded(ps.size())];
    const Eigen::Index i = static_cast<Eigen::Index>(rng.bounded(static_cast<std::uint64_t>(p.value->size())));
    CHECK_MESSAGE(close_rel((*p.grad)[i], fd_slot(&(*p.value)[i], loss), 2e-4), p.name);
  }
}

TEST_CASE("mixed backward matches finite differences at every cut") {
  Rng rng(72);
  InjectableNetD net(2);
  net.init_params(rng);
  net.set_train(true);
  Tensor4d x = random_tensor(rng, 3, 1, 8, 8);
  auto y = random_labels(rng, 3, 2, 8, 8);
  Tensor4d g = random_tensor(rng, 3, 2, 8, 8);

  for (bool mix_skips : {false, true}) {
    for (LayerId k : kInjectionPoints) {
      MixupPlan plan = nontrivial_plan(k, 3, mix_skips);
      auto loss = [&]() { return (net.mixed_forward(x, y, plan).first.v * g.v).sum(); };
      net.zero_grad();
      net.mixed_forward(x, y, plan);
      Tensor4d dx = net.backward(g);

      for (int probe = 0; probe < 8; ++probe) {
        const Eigen::Index i = static_cast<Eigen::Index>(rng.bounded(static_cast<std::uint64_t>(x.size())));
        CHECK_MESSAGE(close_rel(dx.v[i], fd_slot(&x.v[i], loss), 2e-4),
                      to_string(k) << " mix_skips=" << mix_skips << " input slot");
      }
      auto ps = net.params();
      for (int probe = 0; probe < 16; ++probe) {
        auto& p = ps[rng.bounded(ps.size())];
        const Eigen::Index i = static_cast<Eigen::Index>(rng.bounded(static_cast<std::uint64_t>(p.value->size())));
        CHECK_MESSAGE(close_rel((*p.grad)[i], fd_slot(&(*p.value)[i], loss), 2e-4),
                      to_string(k) << " mix_skips=" << mix_skips << ' ' << p.name);
      }
    }
  }
}

TEST_CASE("eval forwards never mutate running statistics; train forwards do") {
  Rng rng(73);
  InjectableNetD net(2);
  net.init_params(rng);
  Tensor4d x = random_tensor(rng, 2, 1, 16, 16);

  auto snapshot = [&]() {
    std::vector<double> out;
    for (auto& s : net.state())
      for (Eigen::Index i = 0; i < s.value->size(); ++i) out.push_back((*s.value)[i]);
    return out;
  };

  net.set_train(false);
  auto before = snapshot();
  net.forward(x);
  CHECK(snapshot() == before);

  net.set_train(true);
  net.forward(x);
  CHECK(snapshot() != before);
}
