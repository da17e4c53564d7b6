#pragma once

// Batched forward/backward pass shared by inference, training and saliency.

#include "liftlab/liftnet.hpp"

#include <Eigen/Core>

#include <vector>

namespace liftlab::net::detail {

struct Pass {
    Eigen::Index batch = 0;
    std::vector<Eigen::MatrixXd> x;       // T x (C x B)
    std::vector<Eigen::MatrixXd> gates;   // T x (4H x B), activated [i; f; g; o]
    std::vector<Eigen::MatrixXd> c;       // T+1 x (H x B), c[0] = 0
    std::vector<Eigen::MatrixXd> h;       // T+1 x (H x B), h[0] = 0
    std::vector<Eigen::MatrixXd> tanh_c;  // T x (H x B)
    std::vector<Eigen::MatrixXd> pre;     // per dense layer (width x B)
    std::vector<Eigen::MatrixXd> act;     // per hidden dense layer (width x B)
    Eigen::RowVectorXd logit;
    Eigen::RowVectorXd prob;
};

/// Loads windows into pass.x; checks shapes and finiteness.
void load_inputs(const Model& model, std::span<const WindowMatrix* const> windows, Pass& pass);

void run_forward(const Model& model, Pass& pass);

/// Backpropagates d(objective)/d(logit) per sample. Either output may be null.
void run_backward(const Model& model, const Pass& pass, const Eigen::RowVectorXd& d_logit,
                  Eigen::VectorXd* param_grad, std::vector<Eigen::MatrixXd>* input_grad);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace liftlab::net::detail
