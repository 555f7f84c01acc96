#pragma once

#include <iosfwd>
#include <string>

#include "qseg/context_index.hpp"
#include "qseg/corpus.hpp"
#include "qseg/seqlab_model.hpp"

namespace qseg {

// Everything inference needs: architecture, character vocabulary, weights,
// and the context-search settings used to build feature bags.
struct SavedModel {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
  SearchOptions search;
};

// "SQMD1", u32 section count, then per section: length-prefixed UTF-8 name,
// u32 rank, u32 dims, row-major little-endian doubles. The "hparams" and
// "vocab" sections come first, followed by the weights in a fixed order.
void save_model(std::ostream& out, const SavedModel& model);
SavedModel load_model(std::istream& in);

void save_model_file(const std::string& path, const SavedModel& model);
SavedModel load_model_file(const std::string& path);

}  // namespace qseg
