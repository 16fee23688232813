#ifndef DLBC_MLP_HPP_
#define DLBC_MLP_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "dlbc/error.hpp"
#include "dlbc/tensor.hpp"

namespace dlbc::nn {

// Layer widths input -> hidden... -> output. Hidden layers use tanh, the
// output layer is linear. Weights get orthogonal init scaled by the gains,
// biases start at zero.
struct MLPSpec {
  std::vector<int> widths;
  double hidden_gain = std::sqrt(2.0);
  double output_gain = 1.0;

  void validate() const {
    require(widths.size() >= 2, "MLPSpec: need input and output widths");
    for (int w : widths) require(w >= 1, "MLPSpec: widths must be >= 1");
  }
  std::size_t num_layers() const { return widths.size() - 1; }
};

// Gain-scaled (semi-)orthogonal rows x cols matrix.
inline Matrix orthogonal(Eigen::Index rows, Eigen::Index cols, double gain,
                         std::mt19937_64& rng) {
  if (gain == 0.0) return Matrix::Zero(rows, cols);
  const bool tall = rows >= cols;
  const Eigen::Index r = tall ? rows : cols;
  const Eigen::Index c = tall ? cols : rows;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(r, c);
  const Eigen::MatrixXd upper = qr.matrixQR();
  for (Eigen::Index j = 0; j < c; ++j) {
    if (upper(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Matrix out = tall ? Matrix(q) : Matrix(q.transpose());
  return gain * out;
}

class MLP {
 public:
  MLP() = default;

  MLP(MLPSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
    spec_.validate();
    for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
      const bool last = l + 1 == spec_.num_layers();
      const double gain = last ? spec_.output_gain : spec_.hidden_gain;
      weights_.push_back(Tensor::parameter(
          orthogonal(spec_.widths[l], spec_.widths[l + 1], gain, rng)));
      biases_.push_back(
          Tensor::parameter(Matrix::Zero(1, spec_.widths[l + 1])));
    }
  }

  const MLPSpec& spec() const { return spec_; }
  int input_width() const { return spec_.widths.front(); }
  int output_width() const { return spec_.widths.back(); }

  // Taped forward pass; `input` is batch x input_width.
  Tensor forward(const Tensor& input) const {
    require(input.cols() == input_width(), "MLP::forward: input width mismatch");
    Tensor h = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      h = add_row(matmul(h, weights_[l]), biases_[l]);
      if (l + 1 < weights_.size()) h = tanh(h);
    }
    return h;
  }

  // Same arithmetic as forward() without recording a graph.
  Matrix evaluate(const Matrix& input) const {
    require(input.cols() == input_width(), "MLP::evaluate: input width mismatch");
    Matrix h = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = h * weights_[l].value();
      Matrix a = z.rowwise() + biases_[l].value().row(0);
      if (l + 1 < weights_.size()) {
        h = a.array().tanh();
      } else {
        h = std::move(a);
      }
    }
    return h;
  }

  // W0, b0, W1, b1, ...
  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      out.push_back(weights_[l]);
      out.push_back(biases_[l]);
    }
    return out;
  }

  std::vector<double> flat_parameters() const {
    std::vector<double> flat;
    for (const auto& p : parameters()) {
      flat.insert(flat.end(), p.value().data(),
                  p.value().data() + p.value().size());
    }
    return flat;
  }

  void set_flat_parameters(const std::vector<double>& flat) {
    std::size_t offset = 0;
    for (auto p : parameters()) {
      const auto n = static_cast<std::size_t>(p.value().size());
      require(offset + n <= flat.size(), "MLP: flat parameter vector too short");
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                flat.begin() + static_cast<std::ptrdiff_t>(offset + n),
                p.mutable_value().data());
      offset += n;
    }
    require(offset == flat.size(), "MLP: flat parameter vector too long");
  }

 private:
  MLPSpec spec_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

}  // namespace dlbc::nn

#endif  // DLBC_MLP_HPP_
