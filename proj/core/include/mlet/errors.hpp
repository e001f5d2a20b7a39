#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlet {

/// Mismatched or otherwise unusable matrix/vector dimensions.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid argument value (bad index, non-positive std, empty input, ...).
class ValueError : public std::invalid_argument {
public:
    explicit ValueError(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative algorithm failed to converge; carries the final residual.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}

    double residual() const { return residual_; }

private:
    double residual_;
};

/// File / stream read or write failure, including format violations.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss or parameter; carries diagnostics.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, std::size_t iteration,
                     std::size_t batch_index, double max_abs_param)
        : std::runtime_error(what),
          iteration_(iteration),
          batch_index_(batch_index),
          max_abs_param_(max_abs_param) {}

    std::size_t iteration() const { return iteration_; }
    std::size_t batch_index() const { return batch_index_; }
    double max_abs_param() const { return max_abs_param_; }

private:
    std::size_t iteration_;
    std::size_t batch_index_;
    double max_abs_param_;
};

}  // namespace mlet
