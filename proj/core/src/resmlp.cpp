/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 scansim contributors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "scansim/resmlp.hpp"

#include <cmath>
#include <numbers>

#include "json_io.hpp"
#include "scansim/error.hpp"
#include "scansim/rng.hpp"

namespace scansim {

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& x, Activation act) {
  if (act == Activation::Identity) return x;
  return x.unaryExpr([](double v) { return gelu(v); });
}

void check_input(const ResMlpParams& p, Eigen::Index rows) {
  if (rows != p.w_in.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(rows) +
                                              " entries, model expects " +
                                              std::to_string(p.w_in.cols()));
  }
}

}  // namespace

std::size_t ResMlpParams::parameter_count() const {
  std::size_t n = static_cast<std::size_t>(w_in.size() + b_in.size());
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.weight.size() + b.bias.size());
  return n;
}

ResMlpParams ResMlpParams::zeros(int input_dim, int width, int block_count) {
  if (input_dim < 1 || width < 1 || block_count < 0) {
    throw Error(ErrorCode::ShapeMismatch, "invalid model dimensions");
  }
  ResMlpParams p;
  p.w_in = Eigen::MatrixXd::Zero(width, input_dim);
  p.b_in = Eigen::VectorXd::Zero(width);
  p.blocks.resize(static_cast<std::size_t>(block_count));
  for (auto& b : p.blocks) {
    b.weight = Eigen::MatrixXd::Zero(width, width);
    b.bias = Eigen::VectorXd::Zero(width);
  }
  return p;
}

ResMlpParams ResMlpParams::random(int input_dim, int width, int block_count, std::uint64_t seed) {
  ResMlpParams p = zeros(input_dim, width, block_count);
  std::vector<double> values(p.parameter_count());
  Rng rng(seed);
  std::size_t at = 0;
  auto fill = [&](std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) values[at++] = rng.uniform(-bound, bound);
  };
  fill(static_cast<std::size_t>(width) * input_dim + width, input_dim);
  for (int b = 0; b < block_count; ++b) fill(static_cast<std::size_t>(width) * width + width, width);
  p.unflatten(values);
  return p;
}

void ResMlpParams::validate() const {
  const auto w = w_in.rows();
  if (w < 1 || w_in.cols() < 1 || b_in.size() != w) {
    throw Error(ErrorCode::ShapeMismatch, "input layer shape mismatch");
  }
  bool finite = w_in.allFinite() && b_in.allFinite();
  for (const auto& b : blocks) {
    if (b.weight.rows() != w || b.weight.cols() != w || b.bias.size() != w) {
      throw Error(ErrorCode::ShapeMismatch, "residual block shape mismatch");
    }
    finite = finite && b.weight.allFinite() && b.bias.allFinite();
  }
  if (!finite) throw Error(ErrorCode::InvalidArgument, "model contains non-finite values");
}

std::vector<double> ResMlpParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  auto push_matrix = [&out](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    }
  };
  auto push_vector = [&out](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  };
  push_matrix(w_in);
  push_vector(b_in);
  for (const auto& b : blocks) {
    push_matrix(b.weight);
    push_vector(b.bias);
  }
  return out;
}

void ResMlpParams::unflatten(const std::vector<double>& values) {
  if (values.size() != parameter_count()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter count mismatch");
  }
  std::size_t at = 0;
  auto read_matrix = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = values[at++];
    }
  };
  auto read_vector = [&](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = values[at++];
  };
  read_matrix(w_in);
  read_vector(b_in);
  for (auto& b : blocks) {
    read_matrix(b.weight);
    read_vector(b.bias);
  }
}

Eigen::VectorXd resmlp_forward(const ResMlpParams& params, const Eigen::VectorXd& input,
                               Activation act) {
  check_input(params, input.size());
  Eigen::VectorXd h = params.w_in * input + params.b_in;
  for (const auto& b : params.blocks) {
    h = h + b.weight * activate(h, act) + b.bias;
  }
  return h;
}

Eigen::MatrixXd resmlp_forward_batch(const ResMlpParams& params, const Eigen::MatrixXd& inputs,
                                     Activation act) {
  check_input(params, inputs.rows());
  Eigen::MatrixXd h = (params.w_in * inputs).colwise() + params.b_in;
  for (const auto& b : params.blocks) {
    Eigen::MatrixXd next = h + b.weight * activate(h, act);
    next.colwise() += b.bias;
    h = std::move(next);
  }
  return h;
}

Eigen::MatrixXd resmlp_forward_tape(const ResMlpParams& params, const Eigen::MatrixXd& inputs,
                                    ResMlpTape& tape) {
  check_input(params, inputs.rows());
  tape.input = inputs;
  tape.block_inputs.clear();
  Eigen::MatrixXd h = (params.w_in * inputs).colwise() + params.b_in;
  tape.block_inputs.push_back(h);
  for (const auto& b : params.blocks) {
    Eigen::MatrixXd next = h + b.weight * activate(h, Activation::Gelu);
    next.colwise() += b.bias;
    h = std::move(next);
    tape.block_inputs.push_back(h);
  }
  return h;
}

ResMlpParams resmlp_backward(const ResMlpParams& params, const ResMlpTape& tape,
                             const Eigen::MatrixXd& grad_output) {
  ResMlpParams g = ResMlpParams::zeros(params.input_dim(), params.width(),
                                       static_cast<int>(params.blocks.size()));
  Eigen::MatrixXd dh = grad_output;
  for (std::size_t i = params.blocks.size(); i-- > 0;) {
    const Eigen::MatrixXd& x = tape.block_inputs[i];
    const Eigen::MatrixXd ax = activate(x, Activation::Gelu);
    g.blocks[i].weight.noalias() = dh * ax.transpose();
    g.blocks[i].bias = dh.rowwise().sum();
    const Eigen::MatrixXd through = params.blocks[i].weight.transpose() * dh;
    dh += through.cwiseProduct(x.unaryExpr([](double v) { return gelu_derivative(v); }));
  }
  g.w_in.noalias() = dh * tape.input.transpose();
  g.b_in = dh.rowwise().sum();
  return g;
}

void save_resmlp(const ResMlpParams& params, const std::filesystem::path& path) {
  params.validate();
  detail::Json header{{"format", "resmlp"},
                      {"version", 1},
                      {"dims", {params.input_dim(), params.width()}},
                      {"block_count", params.blocks.size()},
                      {"activation", "gelu"},
                      {"dtype", "f64"}};
  std::vector<char> blob;
  for (double v : params.flatten()) detail::append_le_f64(blob, v);
  std::string text = header.dump() + "\n";
  text.append(blob.begin(), blob.end());
  detail::write_text_file(path, text);
}

ResMlpParams load_resmlp(const std::filesystem::path& path) {
  const auto file = detail::read_headered_file(path);
  const auto& h = file.header;
  int input = 0, width = 0, blocks = 0;
  try {
    if (h.value("activation", "gelu") != "gelu" || h.value("dtype", "f64") != "f64") {
      throw Error(ErrorCode::UnsupportedVersion, path.string() + ": unsupported activation or dtype");
    }
    if (h.value("version", 1) != 1) {
      throw Error(ErrorCode::UnsupportedVersion, path.string() + ": unsupported model version");
    }
    input = h.at("dims").at(0).get<int>();
    width = h.at("dims").at(1).get<int>();
    blocks = h.at("block_count").get<int>();
  } catch (const detail::Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
  }
  ResMlpParams p = ResMlpParams::zeros(input, width, blocks);
  const std::size_t n = p.parameter_count();
  if (file.payload.size() != n * 8) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": weight blob has wrong size");
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) values[i] = detail::read_le_f64(file.payload.data() + 8 * i);
  p.unflatten(values);
  p.validate();
  return p;
}

}  // namespace scansim
