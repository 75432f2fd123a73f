#pragma once

#include "signbench/catalog.hpp"
#include "signbench/image.hpp"

#include <filesystem>

namespace signbench {

// Procedural stand-in pictograms. Each class gets a fixed glyph structure;
// each design renders that structure with its own stroke weight, scale,
// placement jitter and marker, so designs stay recognizably related while
// differing in exactly the kind of detail classifiers latch onto.
//
// The four classes without a German original follow the documented
// substitutions: a combined glyph for trailer and truck_weight, an alternate
// glyph for cyclist_crossing, and a verbatim copy of the current Austrian
// rendering for wrong_way_driver.
Image paint_pictogram(int class_id, Design design);

// Writes the full 24x3 tree under root/<design>/<class>.png.
void write_asset_tree(const std::filesystem::path& root);

}  // namespace signbench
