// Copyright 2026 The VLP Toy Planner Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace vlp
{

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

#define VLP_DEFINE_ERROR(Name)            \
  class Name : public Error               \
  {                                       \
  public:                                 \
    using Error::Error;                   \
  };

VLP_DEFINE_ERROR(ConfigError)
VLP_DEFINE_ERROR(ArgumentError)
VLP_DEFINE_ERROR(DegenerateError)
VLP_DEFINE_ERROR(EmptyRegionError)
VLP_DEFINE_ERROR(RenderError)
VLP_DEFINE_ERROR(BackendError)
VLP_DEFINE_ERROR(PairingError)
VLP_DEFINE_ERROR(BatchError)
VLP_DEFINE_ERROR(ProtocolError)
VLP_DEFINE_ERROR(SchemaError)
VLP_DEFINE_ERROR(DivergenceError)

#undef VLP_DEFINE_ERROR

}  // namespace vlp
