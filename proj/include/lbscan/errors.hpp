// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lbscan {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a tensor (input or intermediate) holds NaN or Inf. The message
// names the offending tensor.
class NonFiniteError : public std::domain_error {
 public:
  NonFiniteError(const std::string& tensor_name)
      : std::domain_error("non-finite value in tensor '" + tensor_name + "'"),
        tensor_name_(tensor_name) {}

  const std::string& tensor_name() const noexcept { return tensor_name_; }

 private:
  std::string tensor_name_;
};

class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lbscan
