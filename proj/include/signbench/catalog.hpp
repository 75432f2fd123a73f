#pragma once

#include "signbench/image.hpp"

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace signbench {

enum class SignCategory { prohibitory, warning };
enum class SignShape { round, triangular };

// Base design groups plus the two composite tags used for mixed training.
// Composites are resolvable at dataset level only; no asset carries one.
enum class Design : int { ATc = 0, ATn = 1, DE = 2 };
enum class DesignSet : int { ATc = 0, ATn = 1, DE = 2, CUR = 3, ALL = 4 };

constexpr int kNumClasses = 24;
constexpr int kNumDesigns = 3;
constexpr int kAssetSize = 100;

struct TrafficSignClass {
  int id;
  std::string name;  // ASCII identifier, doubles as the asset file stem
  SignCategory category;
  SignShape shape;
};

std::span<const TrafficSignClass> sign_classes();
const TrafficSignClass& sign_class(int id);
int class_id_by_name(const std::string& name);

std::string design_name(Design d);
std::string design_set_name(DesignSet d);
Design parse_design(const std::string& s);
DesignSet parse_design_set(const std::string& s);
bool is_base(DesignSet d);
Design as_base(DesignSet d);
DesignSet as_set(Design d);
std::vector<Design> design_set_members(DesignSet d);

enum class Provenance { official, handcrafted };

// German counterparts of four classes do not exist; their pictograms are
// supplied as hand-prepared stand-ins and flagged accordingly.
bool is_handcrafted(int class_id, Design design);

struct PictogramAsset {
  int class_id = 0;
  Design design = Design::ATc;
  Image raster;  // 100x100 RGBA, alpha = pictogram ink
  Provenance provenance = Provenance::official;
};

struct CatalogError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingAsset : CatalogError {
  MissingAsset(const std::string& cls, const std::string& design)
      : CatalogError("missing pictogram asset: " + design + "/" + cls + ".png") {}
};
struct BadDimensions : CatalogError {
  explicit BadDimensions(const std::string& path)
      : CatalogError("pictogram asset is not 100x100: " + path) {}
};
struct UnreadableImage : CatalogError {
  explicit UnreadableImage(const std::string& path)
      : CatalogError("unreadable pictogram asset: " + path) {}
};
struct UnknownClass : CatalogError {
  explicit UnknownClass(int id)
      : CatalogError("unknown class id: " + std::to_string(id)) {}
};
struct CompositeDesignNotAddressable : CatalogError {
  explicit CompositeDesignNotAddressable(const std::string& tag)
      : CatalogError("composite design tag '" + tag +
                     "' does not address a single asset") {}
};

// Immutable after load; concurrent reads are safe.
class Catalog {
 public:
  // Expects asset_root/<ATc|ATn|DE>/<class-name>.png, 100x100 RGBA.
  static Catalog load(const std::filesystem::path& asset_root);

  const PictogramAsset& lookup(int class_id, Design design) const;
  const PictogramAsset& lookup(int class_id, DesignSet design) const;

  std::size_t size() const { return assets_.size(); }

 private:
  std::vector<PictogramAsset> assets_;  // [design * 24 + class]
};

}  // namespace signbench
