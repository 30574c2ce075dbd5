#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "istn/rates.hpp"

using namespace istn;

namespace {

ChannelRealization random_channel(int ns, int rho, int nt, int kt, double s2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ChannelRealization ch;
  ch.f_hat = CMat(ns, ns * rho);
  ch.z_hat = CMat(ns, kt);
  ch.h = CMat(nt, kt);
  for (auto* m : {&ch.f_hat, &ch.z_hat, &ch.h})
    for (Eigen::Index i = 0; i < m->size(); ++i) (*m)(i) = cplx(nd(rng), nd(rng));
  ch.f_true = ch.f_hat;
  ch.z_true = ch.z_hat;
  ch.csit_error_var = s2;
  for (int k = 0; k < ns * rho; ++k) ch.su_beam.push_back(k / rho);
  return ch;
}

PrecoderSet random_precoders(int ns, int nt, int kt, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  PrecoderSet p(ns, nt, kt);
  for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w(i) = 0.4 * cplx(nd(rng), nd(rng));
  for (Eigen::Index i = 0; i < p.p.size(); ++i) p.p(i) = 0.2 * cplx(nd(rng), nd(rng));
  return p;
}

// |a^H b|^2 spelled out element by element.
double proj2(const CMat& a, int ca, const CMat& b, int cb) {
  double re = 0.0, im = 0.0;
  for (Eigen::Index n = 0; n < a.rows(); ++n) {
    cplx t = std::conj(a(n, ca)) * b(n, cb);
    re += t.real();
    im += t.imag();
  }
  return re * re + im * im;
}

double fro2(const CMat& m) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i) s += m(i).real() * m(i).real() + m(i).imag() * m(i).imag();
  return s;
}

}  // namespace

TEST(EffectiveNoise, ZeroPrecodersGiveUnitNoise) {
  auto ch = random_channel(3, 2, 4, 2, 0.1, 1);
  PrecoderSet p(3, 4, 2);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(effective_noise_g(k, ch, p), 1.0);
  for (int k = 0; k < 2; ++k) EXPECT_EQ(effective_noise_l(k, ch, p), 1.0);
}

TEST(EffectiveNoise, ErrorTermIsIsotropic) {
  auto ch = random_channel(3, 2, 4, 2, 0.1, 1);
  ch.f_hat.setZero();
  ch.z_hat.setZero();
  PrecoderSet p(3, 4, 2);
  p.w_spc()(1) = 1.0;
  EXPECT_NEAR(effective_noise_g(0, ch, p), 1.1, 1e-15);
  EXPECT_NEAR(effective_noise_l(0, ch, p), 1.1, 1e-15);
  ch.csit_error_var = 0.0;
  EXPECT_EQ(effective_noise_g(0, ch, p), 1.0);
}

TEST(Sinr, MatchesScalarRecomputation) {
  const int ns = 2, rho = 2, nt = 3, kt = 2;
  auto ch = random_channel(ns, rho, nt, kt, 0.05, 7);
  auto p = random_precoders(ns, nt, kt, 8);
  auto t = sinr_all(ch, p);
  const double err = 0.05 * fro2(p.w);
  for (int k = 0; k < ns * rho; ++k) {
    double g = 1.0 + err;
    for (int i = 0; i < ns; ++i) g += proj2(ch.f_hat, k, p.w, 2 + i);
    const double own = proj2(ch.f_hat, k, p.w, 2 + k / rho);
    const double sc = proj2(ch.f_hat, k, p.w, 1);
    EXPECT_NEAR(t.su[k].g, g, 1e-12 * g);
    EXPECT_NEAR(t.su[k].spc, proj2(ch.f_hat, k, p.w, 0) / (sc + g), 1e-12);
    EXPECT_NEAR(t.su[k].sc, sc / g, 1e-12);
    EXPECT_NEAR(t.su[k].priv, own / (g - own), 1e-12);
  }
  for (int k = 0; k < kt; ++k) {
    double l = 1.0 + err + proj2(ch.z_hat, k, p.w, 1);
    for (int j = 0; j < kt; ++j) l += proj2(ch.h, k, p.p, 1 + j);
    for (int i = 0; i < ns; ++i) l += proj2(ch.z_hat, k, p.w, 2 + i);
    const double pc = proj2(ch.h, k, p.p, 0);
    const double own = proj2(ch.h, k, p.p, 1 + k);
    EXPECT_NEAR(t.cu[k].l, l, 1e-12 * l);
    EXPECT_NEAR(t.cu[k].spc, proj2(ch.z_hat, k, p.w, 0) / (pc + l), 1e-12);
    EXPECT_NEAR(t.cu[k].common, pc / l, 1e-12);
    EXPECT_NEAR(t.cu[k].priv, own / (l - own), 1e-12);
  }
}

TEST(Sinr, OrthogonalChannelsHaveNoInterference) {
  ChannelRealization ch;
  ch.f_hat = CMat::Identity(2, 2);
  ch.z_hat = CMat::Zero(2, 1);
  ch.h = CMat::Identity(2, 1);
  ch.f_true = ch.f_hat;
  ch.z_true = ch.z_hat;
  ch.su_beam = {0, 1};
  PrecoderSet p(2, 2, 1);
  p.w_private(0)(0) = 2.0;
  p.w_private(1)(1) = cplx(0.0, 3.0);
  auto t = sinr_all(ch, p);
  EXPECT_NEAR(t.su[0].priv, 4.0, 1e-14);
  EXPECT_NEAR(t.su[1].priv, 9.0, 1e-14);
  EXPECT_EQ(t.su[0].spc, 0.0);
}

TEST(Sinr, MoreInterferenceNeverHelps) {
  auto ch = random_channel(3, 2, 4, 2, 0.02, 3);
  auto p = random_precoders(3, 4, 2, 4);
  auto base = sinr_all(ch, p);
  auto q = p;
  q.w_private(1) *= 1.7;  // beam 1 interferes with beams 0 and 2, and all CUs
  q.p_private(0) *= 1.5;
  auto more = sinr_all(ch, q);
  for (int k = 0; k < 6; ++k) {
    if (ch.su_beam[k] != 1) {
      EXPECT_LE(more.su[k].priv, base.su[k].priv + 1e-15);
    }
    EXPECT_LE(more.su[k].sc, base.su[k].sc + 1e-15);
  }
  EXPECT_LE(more.cu[1].priv, base.cu[1].priv + 1e-15);
  EXPECT_LE(more.cu[0].common, base.cu[0].common + 1e-15);
}

TEST(Sinr, TrueChannelMatchesEstimateWithoutError) {
  auto ch = random_channel(3, 2, 4, 2, 0.0, 5);
  auto p = random_precoders(3, 4, 2, 6);
  auto a = sinr_all(ch, p, {}, false);
  auto b = sinr_all(ch, p, {}, true);
  for (int k = 0; k < 6; ++k) EXPECT_EQ(a.su[k].priv, b.su[k].priv);
  for (int k = 0; k < 2; ++k) EXPECT_EQ(a.cu[k].spc, b.cu[k].spc);
}

TEST(Aggregate, ZeroAllocationLeavesPrivateMinima) {
  auto ch = random_channel(3, 2, 4, 2, 0.0, 9);
  auto p = random_precoders(3, 4, 2, 10);
  auto t = sinr_all(ch, p);
  RateAllocation a(3, 2);
  auto r = aggregate(t, a, ch, StreamMask{});
  for (int n = 0; n < 3; ++n) {
    double m = std::min(std::log2(1 + t.su[2 * n].priv), std::log2(1 + t.su[2 * n + 1].priv));
    EXPECT_NEAR(r.beam_total(n), m, 1e-14);
  }
  double mmf = r.beam_total.minCoeff();
  for (int k = 0; k < 2; ++k) mmf = std::min(mmf, std::log2(1 + t.cu[k].priv));
  EXPECT_DOUBLE_EQ(r.mmf, mmf);
  EXPECT_EQ(r.rate_violation, 0.0);
}

TEST(Aggregate, SuperCommonRateIsGlobalMinimum) {
  auto ch = random_channel(3, 2, 4, 2, 0.0, 11);
  auto p = random_precoders(3, 4, 2, 12);
  auto t = sinr_all(ch, p);
  t.su[3].spc = 1e-3;
  auto r = aggregate(t, RateAllocation(3, 2), ch, StreamMask{});
  double brute = 1e300;
  for (auto& s : t.su) brute = std::min(brute, std::log2(1 + s.spc));
  for (auto& c : t.cu) brute = std::min(brute, std::log2(1 + c.spc));
  EXPECT_DOUBLE_EQ(r.r_spc, brute);
  EXPECT_DOUBLE_EQ(r.r_spc, std::log2(1.001));
}

TEST(Aggregate, AuditFlagsOverAllocation) {
  auto ch = random_channel(3, 2, 4, 2, 0.0, 13);
  auto p = random_precoders(3, 4, 2, 14);
  auto t = sinr_all(ch, p);
  RateAllocation a(3, 2);
  auto r0 = aggregate(t, a, ch, StreamMask{});
  a.c_sc(0) = r0.r_sc + 0.25;
  auto r = aggregate(t, a, ch, StreamMask{});
  EXPECT_NEAR(r.rate_violation, 0.25, 1e-12);
  a = RateAllocation(3, 2);
  a.c_bs(1) = -0.5;
  EXPECT_NEAR(aggregate(t, a, ch, StreamMask{}).rate_violation, 0.5, 1e-15);
}

TEST(Aggregate, MaskedStreamsCarryNothing) {
  auto ch = random_channel(3, 2, 4, 2, 0.0, 15);
  auto p = random_precoders(3, 4, 2, 16);
  StreamMask sdma{false, false, false};
  p.apply_mask(sdma, {});
  auto r = aggregate(sinr_all(ch, p), RateAllocation(3, 2), ch, sdma);
  EXPECT_EQ(r.r_spc, 0.0);
  EXPECT_EQ(r.r_sc, 0.0);
  EXPECT_EQ(r.r_c, 0.0);
}

TEST(LinkModel, SubBandScaling) {
  // beta * log2(1 + snr / beta) from noise = beta and rate scale = beta.
  ChannelRealization ch;
  ch.f_hat = CMat::Identity(1, 1);
  ch.z_hat = CMat::Zero(1, 1);
  ch.h = CMat::Identity(1, 1);
  ch.f_true = ch.f_hat;
  ch.z_true = ch.z_hat;
  ch.su_beam = {0};
  PrecoderSet p(1, 1, 1);
  p.w_private(0)(0) = 3.0;
  p.p_private(0)(0) = 2.0;
  const double beta = 0.3;
  LinkModel lm;
  lm.inter_network = false;
  lm.noise_sat = beta;
  lm.rate_scale_sat = beta;
  lm.noise_cell = 1 - beta;
  lm.rate_scale_cell = 1 - beta;
  StreamMask none{false, false, false};
  auto r = aggregate(sinr_all(ch, p, lm), RateAllocation(1, 1), ch, none, lm);
  EXPECT_NEAR(r.beam_total(0), beta * std::log2(1 + 9.0 / beta), 1e-13);
  EXPECT_NEAR(r.cu_total(0), (1 - beta) * std::log2(1 + 4.0 / (1 - beta)), 1e-13);
}

TEST(LinkModel, ColoursRemoveInterBeamTerms) {
  auto ch = random_channel(3, 2, 4, 2, 0.05, 17);
  auto p = random_precoders(3, 4, 2, 18);
  StreamMask none{false, false, false};
  p.apply_mask(none, {});
  LinkModel lm;
  lm.inter_beam = false;
  lm.inter_network = false;
  lm.noise_sat = lm.noise_cell = 0.25;
  auto t = sinr_all(ch, p, lm);
  for (int k = 0; k < 6; ++k) {
    const int b = ch.su_beam[k];
    const double own = proj2(ch.f_hat, k, p.w, 2 + b);
    EXPECT_NEAR(t.su[k].g, 0.25 + own + 0.05 * p.w.col(2 + b).squaredNorm(), 1e-12);
  }
  for (int k = 0; k < 2; ++k) {
    double l = 0.25;
    for (int j = 0; j < 2; ++j) l += proj2(ch.h, k, p.p, 1 + j);
    EXPECT_NEAR(t.cu[k].l, l, 1e-12);
  }
  EXPECT_THROW(lm.validate(StreamMask{}), std::invalid_argument);
}

TEST(Power, ViolationIsRelative) {
  ScenarioConfig cfg;
  PrecoderSet p(3, 16, 3);
  p.w(0, 2) = std::sqrt(cfg.p_sat_watt / 3.0 * 1.1);
  EXPECT_NEAR(power_violation(p, cfg), 0.1, 1e-12);
  p.w.setZero();
  p.p(0, 0) = 1.0;
  EXPECT_EQ(power_violation(p, cfg), 0.0);
}
