#include <catch2/catch_amalgamated.hpp>

#include "gtcnn/train.hpp"
#include "helpers.hpp"

using namespace gtcnn;

namespace {

GTCNNConfig small_config(CouplingMode mode, ProductSpec spec, int f0, ReadoutKind readout,
                         int classes = 3) {
  GTCNNConfig c;
  c.layers = 2;
  c.features = {f0, 3, 2};
  c.orders = {LayerSpec{2, 2, 1}, LayerSpec{1, 1, 1}};
  c.mode = mode;
  c.product = spec;
  c.readout = readout;
  c.classes = classes;
  return c;
}

Sample random_sample(int n, int t, int classes, gtcnn::Rng& rng) {
  Sample s;
  s.x = testutil::random_matrix(n, t, rng);
  s.label = rng.uniform_int(0, classes - 1);
  s.target = testutil::random_vector(n, rng);
  return s;
}

/// Independent straight-line forward: dense Kronecker terms, explicit
/// per-feature sums, no shift recursion shared with the library path.
Eigen::VectorXd dense_forward_scores(const GTCNNModel& m, const GraphPair& g,
                                     const Eigen::MatrixXd& x0) {
  const Eigen::MatrixXd sd = g.spatial.gso.to_dense();
  const Eigen::MatrixXd td = g.temporal.gso.to_dense();
  const auto effective = gtcnn::detail::build_effective(m);
  Eigen::MatrixXd x = x0;
  for (int l = 0; l < m.config.layers; ++l) {
    const FilterBank& bank = effective[static_cast<std::size_t>(l)].bank;
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(x.rows(), bank.f_out);
    for (int k = 0; k <= bank.k_bar; ++k)
      for (int tl = 0; tl <= bank.k_tilde; ++tl) {
        const Eigen::MatrixXd shift =
            testutil::dense_kron(testutil::dense_power(td, tl), testutil::dense_power(sd, k));
        z += shift * x * bank.tap(k, tl).transpose();
      }
    const bool relu = m.config.nonlinearity == Nonlinearity::relu &&
                      (l + 1 < m.config.layers || m.config.final_relu);
    x = relu ? z.cwiseMax(0.0) : z;
  }
  if (m.config.readout == ReadoutKind::classification)
    return m.readout_weight * Eigen::VectorXd(x.colwise().mean()) + m.readout_bias;
  return (x.bottomRows(g.n()) * m.readout_weight.transpose()).col(0) +
         Eigen::VectorXd::Constant(g.n(), m.readout_bias[0]);
}

}  // namespace

TEST_CASE("zero-initialized model yields equal class scores") {
  gtcnn::Rng rng(50);
  GTCNNModel m = init_model(small_config(CouplingMode::product, ProductSpec::cartesian(), 1,
                                         ReadoutKind::classification),
                            rng);
  for (auto& layer : m.layers)
    for (auto& tap : layer.taps) tap.setZero();
  m.readout_weight.setZero();
  m.readout_bias.setZero();
  GraphPair g(testutil::random_symmetric_graph(5, 0.5, rng), line_graph(3));
  ForwardResult fr = forward(m, g, testutil::random_matrix(15, 1, rng));
  REQUIRE((fr.output.array() - fr.output[0]).abs().maxCoeff() == 0.0);
}

TEST_CASE("identity bank with identity readout reproduces the input") {
  gtcnn::Rng rng(51);
  GTCNNConfig c;
  c.layers = 1;
  c.features = {1, 1};
  c.orders = {LayerSpec{0, 0, 0}};
  c.mode = CouplingMode::joint;
  c.readout = ReadoutKind::last_slice_regression;
  c.nonlinearity = Nonlinearity::none;
  GTCNNModel m = init_model(c, rng);
  m.layers[0].taps[0](0, 0) = 1.0;
  m.readout_weight(0, 0) = 1.0;
  m.readout_bias[0] = 0.0;
  GraphPair g(make_graph(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}}),
                         GraphKind::spatial, true),
              line_graph(1));
  Eigen::MatrixXd x = testutil::random_matrix(2, 1, rng);
  ForwardResult fr = forward(m, g, x);
  REQUIRE((fr.output - x.col(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward matches an independent dense re-implementation") {
  gtcnn::Rng rng(52);
  GraphPair g(testutil::random_symmetric_graph(6, 0.5, rng), line_graph(3));
  for (CouplingMode mode : {CouplingMode::product, CouplingMode::joint}) {
    for (ReadoutKind readout : {ReadoutKind::classification, ReadoutKind::last_slice_regression}) {
      GTCNNModel m = init_model(
          small_config(mode, ProductSpec::parametric({{{0.2, 0.9}, {-0.4, 0.6}}}), 1, readout), rng);
      Eigen::MatrixXd x = testutil::random_matrix(18, 1, rng);
      ForwardResult fr = forward(m, g, x);
      REQUIRE((fr.output - dense_forward_scores(m, g, x)).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("forward validates shapes and flags non-finite activations") {
  gtcnn::Rng rng(53);
  GTCNNModel m = init_model(small_config(CouplingMode::product, ProductSpec::strong(), 1,
                                         ReadoutKind::classification),
                            rng);
  GraphPair g(testutil::random_symmetric_graph(4, 0.6, rng), line_graph(3));
  REQUIRE_THROWS_AS(forward(m, g, testutil::random_matrix(11, 1, rng)), ParameterError);
  Eigen::MatrixXd bad = testutil::random_matrix(12, 1, rng);
  bad(3, 0) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_MATCHES(forward(m, g, bad), NumericalError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("layer 0")));
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  gtcnn::Rng rng(54);
  GTCNNModel m = init_model(small_config(CouplingMode::product,
                                         ProductSpec::parametric({{{0.1, 1.0}, {0.8, -0.2}}}), 1,
                                         ReadoutKind::classification),
                            rng);
  GraphPair g(testutil::random_symmetric_graph(5, 0.5, rng), line_graph(3));
  ForwardCache cache;
  forward(m, g, testutil::random_matrix(15, 1, rng), &cache);
  Gradients gr = zero_gradients(m);
  backward(m, g, cache, Eigen::VectorXd::Zero(3), gr);
  REQUIRE(pack_gradients(m, gr).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear model gradient matches the closed-form least-squares gradient") {
  gtcnn::Rng rng(55);
  GTCNNConfig c;
  c.layers = 1;
  c.features = {1, 2};
  c.orders = {LayerSpec{1, 1, 1}};
  c.mode = CouplingMode::joint;
  c.readout = ReadoutKind::last_slice_regression;
  c.nonlinearity = Nonlinearity::none;
  GTCNNModel m = init_model(c, rng);
  GraphPair g(testutil::random_symmetric_graph(4, 0.7, rng), path_graph(3));
  Sample s = random_sample(4, 3, 2, rng);

  ForwardCache cache;
  ForwardResult fr = forward(m, g, input_block(m, g, s), &cache);
  LossGrad lg = mse_loss(fr.output, s.target);
  Gradients gr = zero_gradients(m);
  backward(m, g, cache, lg.d_output, gr);

  // Closed form for the readout of a linear model: d/dw ||F w + b - y||^2 / n.
  const Eigen::MatrixXd last = cache.features.bottomRows(4);
  const Eigen::VectorXd resid = fr.output - s.target;
  const Eigen::MatrixXd dw_expect = (2.0 / 4.0) * (last.transpose() * resid).transpose();
  REQUIRE((gr.readout_weight - dw_expect).cwiseAbs().maxCoeff() <= 1e-10);
  REQUIRE(std::abs(gr.readout_bias[0] - (2.0 / 4.0) * resid.sum()) <= 1e-10);
}

TEST_CASE("analytic gradients match central finite differences for every parameter class") {
  gtcnn::Rng rng(56);
  const GraphPair g(testutil::random_symmetric_graph(5, 0.5, rng), line_graph(3));
  const GraphPair gp(testutil::random_symmetric_graph(5, 0.5, rng), path_graph(3));

  struct Case {
    GTCNNConfig config;
    const GraphPair* pair;
    LossKind loss;
  };
  std::vector<Case> cases;
  GTCNNConfig parametric = small_config(CouplingMode::product,
                                        ProductSpec::parametric({{{0.3, 1.1}, {0.7, -0.5}}}), 1,
                                        ReadoutKind::classification);
  parametric.l1_weight = 0.05;
  cases.push_back({parametric, &g, LossKind::cross_entropy});
  cases.push_back({small_config(CouplingMode::joint, ProductSpec::cartesian(), 1,
                                ReadoutKind::classification),
                   &g, LossKind::cross_entropy});
  cases.push_back({small_config(CouplingMode::product, ProductSpec::strong(), 1,
                                ReadoutKind::last_slice_regression),
                   &gp, LossKind::mse});

  int checked_instances = 0;
  for (const Case& cs : cases) {
    for (int instance = 0; instance < 4 && checked_instances < 10; ++instance, ++checked_instances) {
      GTCNNModel m = init_model(cs.config, rng);
      Sample s = random_sample(5, 3, cs.config.classes, rng);
      Gradients gr = objective_gradient(m, *cs.pair, s, cs.loss);
      const Eigen::VectorXd analytic = pack_gradients(m, gr);
      Eigen::VectorXd theta = pack_parameters(m);
      const double h = 1e-5;
      for (int p = 0; p < theta.size(); ++p) {
        Eigen::VectorXd tp = theta;
        tp[p] = theta[p] + h;
        unpack_parameters(m, tp);
        const double up = objective(m, *cs.pair, s, cs.loss);
        tp[p] = theta[p] - h;
        unpack_parameters(m, tp);
        const double down = objective(m, *cs.pair, s, cs.loss);
        const double fd = (up - down) / (2.0 * h);
        const double scale = std::max({1.0, std::abs(fd), std::abs(analytic[p])});
        REQUIRE(std::abs(fd - analytic[p]) <= 1e-5 * scale);
      }
      unpack_parameters(m, theta);
    }
  }
  REQUIRE(checked_instances >= 10);
}

TEST_CASE("gcnn baseline") {
  gtcnn::Rng rng(57);
  Graph spatial = testutil::random_symmetric_graph(5, 0.6, rng);

  SECTION("matches the product path on a single snapshot") {
    GTCNNConfig c = small_config(CouplingMode::product, ProductSpec::cartesian(), 1,
                                 ReadoutKind::classification);
    GTCNNModel m = init_model(c, rng);
    Eigen::MatrixXd x = testutil::random_matrix(5, 1, rng);
    ForwardResult a = gcnn_baseline_forward(m, spatial, x);
    ForwardResult b = forward(m, GraphPair(spatial, line_graph(1)), x);
    REQUIRE((a.output - b.output).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("only k=0 taps reduce to a pointwise feature map") {
    GTCNNConfig c;
    c.layers = 1;
    c.features = {3, 2};
    c.orders = {LayerSpec{2, 2, 2}};
    c.mode = CouplingMode::product;
    c.product = ProductSpec::cartesian();
    c.readout = ReadoutKind::classification;
    c.classes = 2;
    GTCNNModel m = init_model(c, rng);
    m.layers[0].taps[1].setZero();
    m.layers[0].taps[2].setZero();
    Eigen::MatrixXd x = testutil::random_matrix(5, 3, rng);
    ForwardCache cache;
    gcnn_baseline_forward(m, spatial, x, &cache);
    const Eigen::MatrixXd expect = (x * m.layers[0].taps[0].transpose()).cwiseMax(0.0);
    REQUIRE((cache.features - expect).cwiseAbs().maxCoeff() <= 1e-13);
  }
  SECTION("matches a dense re-implementation") {
    GTCNNConfig c = small_config(CouplingMode::product, ProductSpec::cartesian(), 4,
                                 ReadoutKind::classification);
    GTCNNModel m = init_model(c, rng);
    GraphPair g(spatial, line_graph(1));
    Eigen::MatrixXd x = testutil::random_matrix(5, 4, rng);
    ForwardResult fr = gcnn_baseline_forward(m, spatial, x);
    REQUIRE((fr.output - dense_forward_scores(m, g, x)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("network-level permutation invariance of classification scores") {
  gtcnn::Rng rng(58);
  GraphPair g(testutil::random_symmetric_graph(7, 0.5, rng), line_graph(3));
  GTCNNModel m = init_model(small_config(CouplingMode::product,
                                         ProductSpec::parametric({{{0.3, 0.8}, {1.2, 0.5}}}), 1,
                                         ReadoutKind::classification),
                            rng);
  Eigen::MatrixXd xm = testutil::random_matrix(7, 3, rng);
  const Eigen::VectorXd base = forward(m, g, vectorize(xm).values).output;
  for (int rep = 0; rep < 20; ++rep) {
    Permutation p = Permutation::random(7, rng);
    GraphPair gperm(permute_graph(g.spatial, p), g.temporal);
    Eigen::MatrixXd xp(7, 3);
    for (int c = 0; c < 3; ++c) xp.col(c) = permute_signal(xm.col(c), p);
    const Eigen::VectorXd permuted = forward(m, gperm, vectorize(xp).values).output;
    REQUIRE((permuted - base).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("scaling the input scales a linear network's output") {
  gtcnn::Rng rng(59);
  GTCNNConfig c = small_config(CouplingMode::joint, ProductSpec::cartesian(), 1,
                               ReadoutKind::classification);
  c.nonlinearity = Nonlinearity::none;
  GTCNNModel m = init_model(c, rng);
  m.readout_bias.setZero();
  GraphPair g(testutil::random_symmetric_graph(6, 0.5, rng), line_graph(3));
  Eigen::MatrixXd x = testutil::random_matrix(18, 1, rng);
  const double alpha = -2.7;
  const Eigen::VectorXd base = forward(m, g, x).output;
  const Eigen::VectorXd scaled = forward(m, g, alpha * x).output;
  REQUIRE((scaled - alpha * base).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("training basics") {
  gtcnn::Rng rng(60);
  GraphPair g(testutil::random_symmetric_graph(5, 0.6, rng), line_graph(2));
  GTCNNConfig c = small_config(CouplingMode::product, ProductSpec::cartesian(), 1,
                               ReadoutKind::classification, 2);
  Dataset data;
  for (int i = 0; i < 12; ++i) data.samples.push_back(random_sample(5, 2, 2, rng));

  SECTION("zero learning rate leaves parameters untouched") {
    GTCNNModel m = init_model(c, rng);
    const Eigen::VectorXd before = pack_parameters(m);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 4;
    tc.learning_rate = 0.0;
    tc.split = {0.8, 0.2, 0.0};
    TrainResult r = train(m, data, tc, LossKind::cross_entropy, g);
    REQUIRE((pack_parameters(r.model) - before).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(static_cast<int>(r.history.size()) == 3);
  }
  SECTION("identical seeds give bitwise-identical histories") {
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 4;
    tc.seed = 99;
    tc.split = {0.7, 0.3, 0.0};
    gtcnn::Rng ra(61), rb(61);
    TrainResult a = train(init_model(c, ra), data, tc, LossKind::cross_entropy, g);
    TrainResult b = train(init_model(c, rb), data, tc, LossKind::cross_entropy, g);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      REQUIRE(a.history[i].train_loss == b.history[i].train_loss);
      REQUIRE(a.history[i].val_loss == b.history[i].val_loss);
    }
    REQUIRE((pack_parameters(a.model) - pack_parameters(b.model)).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("a divergent run is flagged with its epoch") {
    GTCNNConfig rc = small_config(CouplingMode::product, ProductSpec::cartesian(), 1,
                                  ReadoutKind::last_slice_regression, 2);
    GTCNNModel m = init_model(rc, rng);
    TrainConfig tc;
    tc.epochs = 40;
    tc.batch_size = 12;
    tc.learning_rate = 1e150;
    tc.split = {1.0, 0.0, 0.0};
    TrainResult r = train(m, data, tc, LossKind::mse, g);
    REQUIRE(r.diverged);
    REQUIRE(r.diverged_epoch >= 0);
  }
}

TEST_CASE("single-sample training overfits monotonically in nearly all seeds") {
  gtcnn::Rng rng(62);
  GraphPair g(testutil::random_symmetric_graph(4, 0.7, rng), line_graph(2));
  GTCNNConfig c;
  c.layers = 1;
  c.features = {1, 2};
  c.orders = {LayerSpec{1, 1, 1}};
  c.mode = CouplingMode::product;
  c.product = ProductSpec::cartesian();
  c.readout = ReadoutKind::classification;
  c.classes = 2;

  int good = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    gtcnn::Rng mr(static_cast<std::uint64_t>(seed) + 100);
    Dataset data;
    data.samples.push_back(random_sample(4, 2, 2, mr));
    TrainConfig tc;
    tc.epochs = 500;
    tc.batch_size = 1;
    tc.seed = static_cast<std::uint64_t>(seed);
    tc.split = {1.0, 0.0, 0.0};
    TrainResult r = train(init_model(c, mr), data, tc, LossKind::cross_entropy, g);
    bool monotone = true;
    for (std::size_t e = 10; e + 1 < r.history.size(); ++e)
      if (r.history[e + 1].train_loss > r.history[e].train_loss + 1e-12) {
        monotone = false;
        break;
      }
    if (monotone) ++good;
  }
  REQUIRE(good >= static_cast<int>(0.95 * seeds));
}

TEST_CASE("a small sweep solves the two-community diffusion toy") {
  // p_in well below 1 so the two communities carry distinct structural
  // fingerprints; the node-mean readout can only separate classes through
  // those.
  auto [g, labels] = sbm_generate(8, 2, 0.7, 0.05, 71);
  HeatKernel kernel(g);
  gtcnn::Rng rng(72);
  Dataset data;
  for (int i = 0; i < 200; ++i) {
    const int src = rng.uniform_int(0, 7);
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(8);
    e0[src] = 1.0;
    Sample s;
    s.x.resize(8, 2);
    s.x.col(0) = kernel.at(e0, 1.0);
    s.x.col(1) = kernel.at(e0, 2.0);
    s.label = labels[static_cast<std::size_t>(src)];
    data.samples.push_back(std::move(s));
  }
  GraphPair pair(g, line_graph(2));
  double best = 0.0;
  for (double lr : {1e-2, 3e-3}) {
    GTCNNConfig c = small_config(CouplingMode::product, ProductSpec::cartesian(), 1,
                                 ReadoutKind::classification, 2);
    c.features = {1, 8, 8};
    gtcnn::Rng mr(73);
    TrainConfig tc;
    tc.epochs = 120;
    tc.batch_size = 20;
    tc.learning_rate = lr;
    tc.seed = 7;
    TrainResult r = train(init_model(c, mr), data, tc, LossKind::cross_entropy, pair);
    const SplitIndices idx = split_indices(data.size(), tc.split, tc.seed);
    best = std::max(best, evaluate(r.model, pair, subset(data, idx.val), Metric::accuracy));
    if (best > 0.9) break;
  }
  REQUIRE(best > 0.9);
}

TEST_CASE("evaluation metrics") {
  gtcnn::Rng rng(63);

  SECTION("hand-computed regression metrics") {
    // constant prediction 3 against targets identically 2
    GTCNNConfig c;
    c.layers = 1;
    c.features = {1, 1};
    c.orders = {LayerSpec{0, 0, 0}};
    c.mode = CouplingMode::joint;
    c.readout = ReadoutKind::last_slice_regression;
    c.nonlinearity = Nonlinearity::none;
    GTCNNModel m = init_model(c, rng);
    m.layers[0].taps[0](0, 0) = 0.0;
    m.readout_weight(0, 0) = 0.0;
    m.readout_bias[0] = 3.0;
    GraphPair g(make_graph(SparseMatrix::identity(2), GraphKind::spatial, true), line_graph(1));
    Dataset data;
    Sample s;
    s.x = Eigen::MatrixXd::Zero(2, 1);
    s.target = Eigen::VectorXd::Constant(2, 2.0);
    data.samples.push_back(s);
    REQUIRE(evaluate(m, g, data, Metric::mae) == 1.0);
    REQUIRE(evaluate(m, g, data, Metric::rmse) == 1.0);
    REQUIRE(evaluate(m, g, data, Metric::mape) == 50.0);

    // perfect predictions
    m.readout_bias[0] = 2.0;
    REQUIRE(evaluate(m, g, data, Metric::mae) == 0.0);
    REQUIRE(evaluate(m, g, data, Metric::rmse) == 0.0);
    REQUIRE(evaluate(m, g, data, Metric::mape) == 0.0);

    // all targets below the MAPE threshold
    data.samples[0].target.setZero();
    m.readout_bias[0] = 0.0;
    int skipped = 0;
    REQUIRE_THROWS_AS(evaluate(m, g, data, Metric::mape, &skipped), DegenerateError);
  }
  SECTION("accuracy of random guessing approaches 1/C") {
    GTCNNConfig c = small_config(CouplingMode::product, ProductSpec::cartesian(), 1,
                                 ReadoutKind::classification, 4);
    GTCNNModel m = init_model(c, rng);
    GraphPair g(testutil::random_symmetric_graph(5, 0.5, rng), line_graph(2));
    Dataset data;
    for (int i = 0; i < 1000; ++i) data.samples.push_back(random_sample(5, 2, 4, rng));
    const double acc = evaluate(m, g, data, Metric::accuracy);
    REQUIRE(acc >= 0.25 - 0.05);
    REQUIRE(acc <= 0.25 + 0.05);
  }
}
