#pragma once

#include <string_view>

// Data files compiled into the library: default lexicon, proper nouns, mock
// table and prompt templates. Keys are paths relative to the source tree, e.g.
// "data/mock_table.json" or "templates/judge/hallucination.txt".
namespace mpr::resources {

// Empty view when the key is unknown.
std::string_view find(std::string_view key);

}  // namespace mpr::resources
