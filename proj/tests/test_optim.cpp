#include <doctest.h>

#include <random>

#include "difftree/optim.hpp"
#include "difftree/tree.hpp"

using namespace difftree;

TEST_SUITE_BEGIN("optim");

TEST_CASE("zero gradient leaves parameters unchanged") {
  for (OptimizerKind kind : {OptimizerKind::Adam, OptimizerKind::QhAdam}) {
    Optimizer opt(kind, 4);
    Eigen::VectorXd params(4);
    params << 1.0, -2.0, 0.5, 3.0;
    const Eigen::VectorXd before = params;
    opt.step(params, Eigen::VectorXd::Zero(4), 0.1);
    CHECK((params - before).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("adam first step has closed form") {
  Optimizer opt(OptimizerKind::Adam, 1);
  Eigen::VectorXd params = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd grad = Eigen::VectorXd::Ones(1);
  opt.step(params, grad, 0.1);
  // Bias correction makes m_hat = v_hat = g, so the step is -lr (up to eps).
  CHECK(params(0) == doctest::Approx(-0.1).epsilon(1e-7));
}

TEST_CASE("qhadam with nu1 = 1 reduces to adam") {
  Optimizer adam(OptimizerKind::Adam, 3);
  Optimizer qh(OptimizerKind::QhAdam, 3);
  qh.nu1 = 1.0;
  qh.beta1 = adam.beta1;

  std::mt19937_64 rng(5);
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd pa = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd pq = Eigen::VectorXd::Zero(3);
  for (int step = 0; step < 20; ++step) {
    Eigen::VectorXd g(3);
    for (int i = 0; i < 3; ++i) g(i) = dist(rng);
    adam.step(pa, g, 0.01);
    qh.step(pq, g, 0.01);
    CHECK((pa - pq).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("parameter packing round-trips bit-exactly") {
  std::mt19937_64 rng(9);
  const TreeTopology tree = TreeTopology::build(2);
  SplitParams split = make_split_params(tree, 4, Activation::Elu, rng);
  PredictorParams pred = make_predictor(11, 2, 2, 5, 0.1, true, rng);

  const Eigen::VectorXd flat = pack_params(split, pred);
  SplitParams split2 = split;
  PredictorParams pred2 = pred;
  split2.weights.setZero();
  split2.bias.setZero();
  for (auto& l : pred2.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  unpack_params(flat, split2, pred2);
  CHECK((split.weights - split2.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK((split.bias - split2.bias).cwiseAbs().maxCoeff() == 0.0);
  for (size_t l = 0; l < pred.layers.size(); ++l) {
    CHECK((pred.layers[l].weight - pred2.layers[l].weight).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pred.layers[l].bias - pred2.layers[l].bias).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_SUITE_END();
