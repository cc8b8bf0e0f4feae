#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "molvae/chem/vocabulary.hpp"
#include "molvae/model/params.hpp"

namespace molvae::testing {

inline chem::Vocabulary vocab_from_lines(const std::string& corpus, int rep = 2) {
  std::istringstream is(corpus);
  return chem::build_vocabulary(is, chem::representation_from_int(rep));
}

template <class S>
model::Model<S> toy_model(const std::string& corpus, std::uint64_t seed = 1,
                          model::ModelConfig config = {}, int rep = 2) {
  return model::Model<S>::initialize(vocab_from_lines(corpus, rep), std::move(config), seed);
}

}  // namespace molvae::testing
