// Copyright 2026 The DALM Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dalm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DALM_DEFINE_ERROR(Name)  \
  class Name : public Error {    \
   public:                       \
    using Error::Error;          \
  }

// Domain parsing / lattice.
DALM_DEFINE_ERROR(MissingLeadingAt);
DALM_DEFINE_ERROR(EmptySegment);
DALM_DEFINE_ERROR(IllegalCharacter);
DALM_DEFINE_ERROR(AmbiguousImplication);
DALM_DEFINE_ERROR(UnregisteredDomain);

// Meta fiber.
DALM_DEFINE_ERROR(UnknownRelation);
DALM_DEFINE_ERROR(UnknownRelationReference);
DALM_DEFINE_ERROR(DuplicateRelation);
DALM_DEFINE_ERROR(InvalidScore);
DALM_DEFINE_ERROR(OutOfRange);
DALM_DEFINE_ERROR(MissingSoftTable);

// Embeddings / training.
DALM_DEFINE_ERROR(DimensionMismatch);
DALM_DEFINE_ERROR(OutsideBall);
DALM_DEFINE_ERROR(MissingEmbedding);
DALM_DEFINE_ERROR(InsufficientLattice);
DALM_DEFINE_ERROR(EmptyFiber);
DALM_DEFINE_ERROR(EmptyLibrary);

// Decoder.
DALM_DEFINE_ERROR(NoQueryConcepts);
DALM_DEFINE_ERROR(DegenerateModel);

// Denoising lab.
DALM_DEFINE_ERROR(QuotaUnreachable);

#undef DALM_DEFINE_ERROR

// Malformed persisted content; carries a human-readable location.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& message, std::string location = "")
      : Error(location.empty() ? message : message + " [" + location + "]"),
        location_(std::move(location)) {}
  const std::string& location() const { return location_; }

 private:
  std::string location_;
};

// Malformed ingest stream; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(message + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace dalm
