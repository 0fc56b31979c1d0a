// Copyright 2026 The rlplace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RLPLACE__ERRORS_HPP_
#define RLPLACE__ERRORS_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace rlplace
{

// Every failure raised by the library derives from Error. kind() is a short
// stable token used by the CLI for its machine-parsable diagnostic line.
class Error : public std::runtime_error
{
public:
  Error(std::string_view kind, const std::string & what)
  : std::runtime_error(what), kind_(kind) {}

  std::string_view kind() const noexcept { return kind_; }

private:
  std::string_view kind_;
};

#define RLPLACE_DEFINE_ERROR(Name, token)                                   \
  class Name : public Error                                                 \
  {                                                                         \
public:                                                                     \
    explicit Name(const std::string & what) : Error(token, what) {}         \
  };

RLPLACE_DEFINE_ERROR(ParameterError, "parameter")
RLPLACE_DEFINE_ERROR(IoError, "io")
RLPLACE_DEFINE_ERROR(ParseError, "parse")
RLPLACE_DEFINE_ERROR(VersionError, "version")
RLPLACE_DEFINE_ERROR(ValidationError, "validation")
RLPLACE_DEFINE_ERROR(FrameError, "frame")
RLPLACE_DEFINE_ERROR(ContractError, "contract")
RLPLACE_DEFINE_ERROR(ShapeError, "shape")
RLPLACE_DEFINE_ERROR(DivergenceError, "divergence")
RLPLACE_DEFINE_ERROR(BudgetError, "budget")

#undef RLPLACE_DEFINE_ERROR

}  // namespace rlplace

#endif  // RLPLACE__ERRORS_HPP_
