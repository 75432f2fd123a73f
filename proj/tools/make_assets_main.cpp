#include "signbench/assets.hpp"

#include <cstdio>
#include <exception>

// Writes the procedural stand-in pictogram tree (24 classes x 3 designs).
// Replace the files under the same layout to run with real pictogram art.
int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_assets <asset-root>\n");
    return 2;
  }
  try {
    signbench::write_asset_tree(argv[1]);
    std::printf("wrote %d assets under %s\n", 24 * 3, argv[1]);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
