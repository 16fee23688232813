#include "dlbc/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dlbc/mlp.hpp"
#include "dlbc/optim.hpp"
#include "oracles.hpp"

namespace dlbc::nn {
namespace {

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Checks every entry of every parameter against central differences.
void expect_gradients_match(const std::function<Tensor()>& loss,
                            std::vector<Tensor> params, double rel_tol) {
  for (auto& p : params) p.zero_grad();
  loss().backward();
  for (auto& p : params) {
    const Matrix analytic = p.grad();
    for (Eigen::Index k = 0; k < p.value().size(); ++k) {
      double* x = p.mutable_value().data() + k;
      const double numeric =
          oracle::central_difference([&] { return loss().item(); }, x, 1e-6);
      const double denom = std::max(1e-6, std::abs(analytic.data()[k]) + std::abs(numeric));
      EXPECT_LE(std::abs(analytic.data()[k] - numeric) / denom, rel_tol)
          << "entry " << k << " analytic " << analytic.data()[k] << " numeric " << numeric;
    }
  }
}

TEST(Tensor, SumOfProductGradients) {
  Matrix av(1, 3), bv(1, 3);
  av << 1.0, 2.0, 3.0;
  bv << 4.0, 5.0, 6.0;
  Tensor a = Tensor::parameter(av);
  Tensor b = Tensor::parameter(bv);
  Tensor loss = sum(a * b);
  EXPECT_DOUBLE_EQ(loss.item(), 32.0);
  loss.backward();
  EXPECT_EQ(a.grad(), bv);
  EXPECT_EQ(b.grad(), av);
}

TEST(Tensor, SquareGradient) {
  Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 3.0));
  square(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 6.0);
}

TEST(Tensor, GradientsAccumulateOverSharedUse) {
  Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 2.0));
  Tensor y = x * x + x * 3.0;
  sum(y).backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 7.0);
}

TEST(Tensor, ConstantsReceiveNoGradient) {
  Tensor c = Tensor::constant(Matrix::Ones(2, 2));
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2));
  sum(c * p).backward();
  EXPECT_FALSE(c.has_grad());
  EXPECT_TRUE(p.has_grad());
}

TEST(Tensor, BackwardRequiresScalar) {
  Tensor p = Tensor::parameter(Matrix::Ones(2, 2));
  EXPECT_THROW((p * 2.0).backward(), ContractViolation);
}

TEST(Tensor, ShapeMismatchThrows) {
  Tensor a = Tensor::parameter(Matrix::Ones(2, 3));
  Tensor b = Tensor::parameter(Matrix::Ones(3, 2));
  EXPECT_THROW(a + b, ContractViolation);
  EXPECT_THROW(matmul(a, a), ContractViolation);
}

TEST(Tensor, DetachStopsGradient) {
  Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 2.0));
  sum(x * x.detach()).backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 2.0);
}

TEST(Tensor, ElementwiseOpsMatchFiniteDifferences) {
  std::mt19937_64 rng(1);
  Tensor a = Tensor::parameter(random_matrix(rng, 3, 4));
  Tensor b = Tensor::parameter(random_matrix(rng, 3, 4));
  Tensor bias = Tensor::parameter(random_matrix(rng, 1, 4));
  auto loss = [&] {
    Tensor z = add_row(a * b, bias);
    Tensor t = tanh(z) + exp(clamp(b, -0.5, 0.5)) - square(a) * 0.3;
    Tensor m = minimum(t, -a + 0.25);
    return mean(row_sum(m * m)) + sum(broadcast_rows(bias, 2) * 0.1);
  };
  expect_gradients_match(loss, {a, b, bias}, 1e-4);
}

TEST(Tensor, TwoHiddenLayerNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  MLPSpec spec;
  spec.widths = {5, 7, 6, 3};
  spec.output_gain = 1.0;
  MLP net(spec, rng);
  // Nonzero biases so their gradients are exercised away from zero.
  for (auto p : net.parameters()) p.mutable_value() += 0.1 * random_matrix(rng, p.rows(), p.cols());
  const Tensor x = Tensor::constant(random_matrix(rng, 4, 5));
  const Matrix target = random_matrix(rng, 4, 3);
  auto loss = [&] { return mean(square(net.forward(x) - Tensor::constant(target))); };
  expect_gradients_match(loss, net.parameters(), 1e-4);
}

TEST(Mlp, ForwardMatchesLoopOracle) {
  std::mt19937_64 rng(3);
  MLPSpec spec;
  spec.widths = {6, 8, 8, 2};
  spec.output_gain = 0.7;
  MLP net(spec, rng);
  for (auto p : net.parameters()) p.mutable_value() += 0.05 * random_matrix(rng, p.rows(), p.cols());
  std::vector<Matrix> w, b;
  const auto params = net.parameters();
  for (std::size_t k = 0; k < params.size(); k += 2) {
    w.push_back(params[k].value());
    b.push_back(params[k + 1].value());
  }
  const Matrix x = random_matrix(rng, 5, 6);
  const Matrix taped = net.forward(Tensor::constant(x)).value();
  const Matrix plain = net.evaluate(x);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    std::vector<double> row(x.row(r).data(), x.row(r).data() + x.cols());
    const auto expected = oracle::mlp_forward(w, b, row);
    for (Eigen::Index c = 0; c < 2; ++c) {
      EXPECT_NEAR(taped(r, c), expected[static_cast<std::size_t>(c)], 1e-12);
      EXPECT_NEAR(plain(r, c), expected[static_cast<std::size_t>(c)], 1e-12);
    }
  }
}

TEST(Mlp, OrthogonalInitialisation) {
  std::mt19937_64 rng(4);
  const Matrix tall = orthogonal(8, 3, 2.0, rng);
  EXPECT_TRUE((tall.transpose() * tall).isApprox(4.0 * Matrix::Identity(3, 3), 1e-12));
  const Matrix wide = orthogonal(3, 8, 1.0, rng);
  EXPECT_TRUE((wide * wide.transpose()).isApprox(Matrix::Identity(3, 3), 1e-12));
  EXPECT_TRUE(orthogonal(4, 4, 0.0, rng).isZero());
}

TEST(Mlp, FlatParameterRoundTrip) {
  std::mt19937_64 rng(5);
  MLPSpec spec;
  spec.widths = {3, 4, 2};
  MLP net(spec, rng);
  auto flat = net.flat_parameters();
  EXPECT_EQ(flat.size(), 3u * 4 + 4 + 4 * 2 + 2);
  for (auto& v : flat) v += 1.0;
  net.set_flat_parameters(flat);
  EXPECT_EQ(net.flat_parameters(), flat);
  flat.pop_back();
  EXPECT_THROW(net.set_flat_parameters(flat), ContractViolation);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor x = Tensor::parameter(Matrix::Constant(1, 2, 1.0));
  Adam::Options o;
  o.lr = 0.1;
  o.eps = 0.0;
  Adam adam({x}, o);
  sum(x * 3.0).backward();
  adam.step();
  EXPECT_NEAR(x.value()(0, 0), 0.9, 1e-12);
  EXPECT_NEAR(x.value()(0, 1), 0.9, 1e-12);
}

TEST(Adam, ClipGradNorm) {
  Tensor x = Tensor::parameter(Matrix::Constant(1, 2, 0.0));
  Adam adam({x}, {});
  Matrix g(1, 2);
  g << 3.0, 4.0;
  sum(x * Tensor::constant(g)).backward();
  EXPECT_DOUBLE_EQ(adam.clip_grad_norm(1.0), 5.0);
  EXPECT_NEAR(grad_norm({x}), 1.0, 1e-12);
  EXPECT_NEAR(x.grad()(0, 0), 0.6, 1e-12);
}

TEST(Adam, MinimisesQuadratic) {
  Tensor x = Tensor::parameter(Matrix::Constant(1, 3, 5.0));
  Adam::Options o;
  o.lr = 0.05;
  Adam adam({x}, o);
  for (int k = 0; k < 2000; ++k) {
    adam.zero_grad();
    sum(square(x - 1.0 * Tensor::constant(Matrix::Constant(1, 3, 2.0)))).backward();
    adam.step();
  }
  EXPECT_NEAR(x.value()(0, 1), 2.0, 1e-3);
}

}  // namespace
}  // namespace dlbc::nn
