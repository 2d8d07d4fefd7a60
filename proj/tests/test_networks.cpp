#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "abibench/networks.hpp"
#include "abibench/optimizer.hpp"

using namespace abibench;

TEST_CASE("glorot init respects the fan bound and is seed-deterministic") {
  rng::RngStream rs1(42, "glorot");
  rng::RngStream rs2(42, "glorot");
  const Matrix w1 = nets::glorot_uniform(64, 32, rs1);
  const Matrix w2 = nets::glorot_uniform(64, 32, rs2);
  CHECK((w1 - w2).cwiseAbs().maxCoeff() == 0.0);
  const double bound = std::sqrt(6.0 / (64.0 + 32.0));
  CHECK(w1.cwiseAbs().maxCoeff() <= bound);
  CHECK(w1.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("per-parameter init streams do not interfere") {
  nets::MlpConfig cfg{{4, 8, 2}, nets::Activation::Tanh};
  ad::ParamStore lone;
  nets::init_mlp(lone, "net", cfg, 7);

  ad::ParamStore shared;
  nets::init_mlp(shared, "other", cfg, 7);  // extra sibling first
  nets::init_mlp(shared, "net", cfg, 7);
  for (const auto& [name, value] : lone) {
    CHECK((value - shared.at(name)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("mlp plain and taped paths agree bit for bit") {
  nets::MlpConfig cfg{{3, 16, 16, 5}, nets::Activation::Relu};
  ad::ParamStore params;
  nets::init_mlp(params, "net", cfg, 11);
  rng::RngStream rs(1, "mlp-in");
  const Matrix x = rs.normal_matrix(7, 3);

  const Matrix plain = nets::mlp_forward(cfg, params, "net", x);
  ad::Graph g;
  const Matrix taped = nets::mlp_forward(g, cfg, params, "net", g.input(x)).value();
  CHECK((plain - taped).cwiseAbs().maxCoeff() == 0.0);
  CHECK(plain.rows() == 7);
  CHECK(plain.cols() == 5);
}

TEST_CASE("deep set summary is exactly invariant to row order") {
  nets::DeepSetConfig cfg;
  ad::ParamStore params;
  nets::init_deepset(params, "summary", cfg, 3);
  rng::RngStream rs(9, "ds-data");
  const Matrix x = rs.normal_matrix(50, 2);

  std::vector<Eigen::Index> order(50);
  std::iota(order.begin(), order.end(), 0);
  rs.shuffle(order);
  Matrix shuffled(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) shuffled.row(i) = x.row(order[i]);

  const Matrix s1 = nets::deepset_forward(cfg, params, "summary", x);
  const Matrix s2 = nets::deepset_forward(cfg, params, "summary", shuffled);
  CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0);

  ad::Graph g;
  const Matrix t1 = nets::deepset_forward(g, cfg, params, "summary", x).value();
  const Matrix t2 = nets::deepset_forward(g, cfg, params, "summary", shuffled).value();
  CHECK((t1 - t2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s1 - t1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mean pooling maps duplicated rows to the single-row summary") {
  nets::DeepSetConfig cfg;
  ad::ParamStore params;
  nets::init_deepset(params, "summary", cfg, 5);
  rng::RngStream rs(2, "ds-dup");
  const Matrix one = rs.normal_matrix(1, 2);
  Matrix two(2, 2);
  two.row(0) = one.row(0);
  two.row(1) = one.row(0);
  const Matrix s1 = nets::deepset_forward(cfg, params, "summary", one);
  const Matrix s2 = nets::deepset_forward(cfg, params, "summary", two);
  CHECK((s1 - s2).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("conv summary: shapes, plain/tape agreement, impulse response") {
  nets::ConvSummaryConfig cfg;
  ad::ParamStore params;
  nets::init_conv_summary(params, "summary", cfg, 21);

  rng::RngStream rs(4, "conv-in");
  const Matrix img = rs.uniform_matrix(1, 256, -1.0, 1.0);
  const Matrix plain = nets::conv_summary_forward(cfg, params, "summary", img);
  CHECK(plain.rows() == 1);
  CHECK(plain.cols() == 32);
  CHECK(plain.allFinite());

  ad::Graph g;
  const Matrix taped = nets::conv_summary_forward(g, cfg, params, "summary", img).value();
  CHECK((plain - taped).cwiseAbs().maxCoeff() == 0.0);

  // A single bright pixel must produce a different summary than a blank image.
  Matrix blank = Matrix::Constant(1, 256, -1.0);
  Matrix impulse = blank;
  impulse(0, 8 * 16 + 8) = 1.0;
  const Matrix s_blank = nets::conv_summary_forward(cfg, params, "summary", blank);
  const Matrix s_impulse = nets::conv_summary_forward(cfg, params, "summary", impulse);
  CHECK((s_blank - s_impulse).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("conv summary rejects non-flat inputs and clips out-of-range pixels") {
  nets::ConvSummaryConfig cfg;
  ad::ParamStore params;
  nets::init_conv_summary(params, "summary", cfg, 23);
  CHECK_THROWS_AS(nets::conv_summary_forward(cfg, params, "summary", Matrix::Zero(2, 256)),
                  ConfigError);
  CHECK_THROWS_AS(nets::conv_summary_forward(cfg, params, "summary", Matrix::Zero(1, 100)),
                  ConfigError);

  Matrix hot = Matrix::Constant(1, 256, 3.0);  // out of range, clips to 1
  const Matrix clipped = nets::conv_summary_forward(cfg, params, "summary", hot);
  const Matrix ones = nets::conv_summary_forward(cfg, params, "summary",
                                                 Matrix::Constant(1, 256, 1.0));
  CHECK((clipped - ones).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("classifier learns a linearly separable summary space") {
  nets::ClassifierConfig cfg;
  cfg.input_dim = 2;
  cfg.width = 32;
  cfg.hidden_layers = 2;
  ad::ParamStore params;
  nets::init_classifier(params, "clf", cfg, 77);

  rng::RngStream rs(31, "clf-data");
  const auto draw = [&](double shift, Eigen::Index n) {
    Matrix x = rs.normal_matrix(n, 2);
    x.array() *= 0.4;
    x.array() += shift;
    return x;
  };
  const Matrix pos = draw(1.0, 100);
  const Matrix neg = draw(-1.0, 100);

  opt::AdamConfig acfg;
  acfg.base_lr = 5e-3;
  acfg.total_steps = 200;
  opt::Adam adam(acfg);
  for (int step = 0; step < 200; ++step) {
    ad::Graph g;
    ad::Var lp = nets::classifier_logits(g, cfg, params, "clf", g.input(pos));
    ad::Var ln = nets::classifier_logits(g, cfg, params, "clf", g.input(neg));
    ad::Var loss = ad::add(ad::mean(ad::softplus(ad::neg(lp))), ad::mean(ad::softplus(ln)));
    adam.step(params, g.backward(loss));
  }

  const Matrix test_pos = draw(1.0, 200);
  const Matrix test_neg = draw(-1.0, 200);
  const Matrix logit_pos = nets::classifier_logits(cfg, params, "clf", test_pos);
  const Matrix logit_neg = nets::classifier_logits(cfg, params, "clf", test_neg);
  int correct = 0;
  for (Eigen::Index i = 0; i < 200; ++i) {
    if (logit_pos(i, 0) > 0.0) ++correct;
    if (logit_neg(i, 0) < 0.0) ++correct;
  }
  CHECK(correct > 380);  // > 0.95 accuracy
}
