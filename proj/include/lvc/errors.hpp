// Copyright 2026 The LVC Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef LVC_ERRORS_HPP_
#define LVC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace lvc {

// Root of every error raised by the toolkit. The CLI maps IoError to exit
// status 2 and every other Error to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LVC_DEFINE_ERROR(Name)       \
  class Name : public Error {        \
   public:                           \
    using Error::Error;              \
  }

// geometry
LVC_DEFINE_ERROR(ZeroSizeAnchor);
LVC_DEFINE_ERROR(DegenerateBox);

// datamodel
LVC_DEFINE_ERROR(ParseError);
LVC_DEFINE_ERROR(IntegrityError);
LVC_DEFINE_ERROR(RangeError);
LVC_DEFINE_ERROR(ShapeError);
LVC_DEFINE_ERROR(KeyError);
LVC_DEFINE_ERROR(InsufficientShots);
LVC_DEFINE_ERROR(IoError);

// verifier
LVC_DEFINE_ERROR(MissingEmbedding);
LVC_DEFINE_ERROR(BadK);
LVC_DEFINE_ERROR(NormalizationError);
LVC_DEFINE_ERROR(DimensionMismatch);
LVC_DEFINE_ERROR(ZeroVector);

// corrector
LVC_DEFINE_ERROR(EmptyStage);
LVC_DEFINE_ERROR(DivergedLoss);
LVC_DEFINE_ERROR(MissingFeature);

// evaluator
LVC_DEFINE_ERROR(NoGroundTruth);

// synthworld
LVC_DEFINE_ERROR(CenterPlacementFailure);
LVC_DEFINE_ERROR(ConfigError);

#undef LVC_DEFINE_ERROR

}  // namespace lvc

#endif  // LVC_ERRORS_HPP_
