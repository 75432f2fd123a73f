#include "signbench/catalog.hpp"

#include "signbench/png_io.hpp"

#include <algorithm>
#include <array>

namespace signbench {

namespace {

const std::array<TrafficSignClass, kNumClasses> kClasses = {{
    {0, "axle_weight", SignCategory::prohibitory, SignShape::round},
    {1, "trailer", SignCategory::prohibitory, SignShape::round},
    {2, "truck_trailer", SignCategory::prohibitory, SignShape::round},
    {3, "truck", SignCategory::prohibitory, SignShape::round},
    {4, "truck_weight", SignCategory::prohibitory, SignShape::round},
    {5, "omnibus", SignCategory::prohibitory, SignShape::round},
    {6, "motorcycle", SignCategory::prohibitory, SignShape::round},
    {7, "moped", SignCategory::prohibitory, SignShape::round},
    {8, "cycle", SignCategory::prohibitory, SignShape::round},
    {9, "cycle_moped", SignCategory::prohibitory, SignShape::round},
    {10, "power_driven", SignCategory::prohibitory, SignShape::round},
    {11, "single_tracked", SignCategory::prohibitory, SignShape::round},
    {12, "riding", SignCategory::prohibitory, SignShape::round},
    {13, "animal_drawn", SignCategory::prohibitory, SignShape::round},
    {14, "overtaking", SignCategory::prohibitory, SignShape::round},
    {15, "truck_overtaking", SignCategory::prohibitory, SignShape::round},
    {16, "dangerous_goods", SignCategory::prohibitory, SignShape::round},
    {17, "pedestrian", SignCategory::prohibitory, SignShape::round},
    {18, "road_works", SignCategory::warning, SignShape::triangular},
    {19, "children", SignCategory::warning, SignShape::triangular},
    {20, "pedestrian_crossing", SignCategory::warning, SignShape::triangular},
    {21, "cyclist_crossing", SignCategory::warning, SignShape::triangular},
    {22, "slippery", SignCategory::warning, SignShape::triangular},
    {23, "wrong_way_driver", SignCategory::warning, SignShape::triangular},
}};

// Classes whose German pictogram had to be hand-prepared.
constexpr std::array<int, 4> kHandcraftedDe = {1, 4, 21, 23};

}  // namespace

std::span<const TrafficSignClass> sign_classes() {
  return {kClasses.data(), kClasses.size()};
}

const TrafficSignClass& sign_class(int id) {
  if (id < 0 || id >= kNumClasses) throw UnknownClass(id);
  return kClasses[static_cast<std::size_t>(id)];
}

int class_id_by_name(const std::string& name) {
  for (const auto& c : kClasses)
    if (c.name == name) return c.id;
  throw CatalogError("unknown class name: " + name);
}

std::string design_name(Design d) {
  switch (d) {
    case Design::ATc: return "ATc";
    case Design::ATn: return "ATn";
    case Design::DE: return "DE";
  }
  throw CatalogError("bad design value");
}

std::string design_set_name(DesignSet d) {
  switch (d) {
    case DesignSet::ATc: return "ATc";
    case DesignSet::ATn: return "ATn";
    case DesignSet::DE: return "DE";
    case DesignSet::CUR: return "CUR";
    case DesignSet::ALL: return "ALL";
  }
  throw CatalogError("bad design set value");
}

Design parse_design(const std::string& s) {
  if (s == "ATc") return Design::ATc;
  if (s == "ATn") return Design::ATn;
  if (s == "DE") return Design::DE;
  throw CatalogError("unknown design tag: " + s);
}

DesignSet parse_design_set(const std::string& s) {
  if (s == "CUR") return DesignSet::CUR;
  if (s == "ALL") return DesignSet::ALL;
  return static_cast<DesignSet>(static_cast<int>(parse_design(s)));
}

bool is_base(DesignSet d) { return static_cast<int>(d) < kNumDesigns; }

Design as_base(DesignSet d) {
  if (!is_base(d)) throw CompositeDesignNotAddressable(design_set_name(d));
  return static_cast<Design>(static_cast<int>(d));
}

DesignSet as_set(Design d) { return static_cast<DesignSet>(static_cast<int>(d)); }

std::vector<Design> design_set_members(DesignSet d) {
  switch (d) {
    case DesignSet::CUR: return {Design::ATc, Design::DE};
    case DesignSet::ALL: return {Design::ATc, Design::ATn, Design::DE};
    default: return {as_base(d)};
  }
}

bool is_handcrafted(int class_id, Design design) {
  return design == Design::DE &&
         std::find(kHandcraftedDe.begin(), kHandcraftedDe.end(), class_id) !=
             kHandcraftedDe.end();
}

Catalog Catalog::load(const std::filesystem::path& asset_root) {
  Catalog cat;
  cat.assets_.resize(static_cast<std::size_t>(kNumDesigns) * kNumClasses);
  for (int d = 0; d < kNumDesigns; ++d) {
    const auto design = static_cast<Design>(d);
    for (const auto& cls : kClasses) {
      const auto path = asset_root / design_name(design) / (cls.name + ".png");
      if (!std::filesystem::exists(path)) throw MissingAsset(cls.name, design_name(design));
      Image raster;
      try {
        raster = read_png(path);
      } catch (const PngError&) {
        throw UnreadableImage(path.string());
      }
      if (raster.width != kAssetSize || raster.height != kAssetSize)
        throw BadDimensions(path.string());
      if (raster.channels() != 4) throw UnreadableImage(path.string() + " (expected RGBA)");
      auto& slot = cat.assets_[static_cast<std::size_t>(d) * kNumClasses + cls.id];
      slot.class_id = cls.id;
      slot.design = design;
      slot.raster = std::move(raster);
      slot.provenance = is_handcrafted(cls.id, design) ? Provenance::handcrafted
                                                       : Provenance::official;
    }
  }
  return cat;
}

const PictogramAsset& Catalog::lookup(int class_id, Design design) const {
  if (class_id < 0 || class_id >= kNumClasses) throw UnknownClass(class_id);
  return assets_[static_cast<std::size_t>(design) * kNumClasses + class_id];
}

const PictogramAsset& Catalog::lookup(int class_id, DesignSet design) const {
  return lookup(class_id, as_base(design));
}

}  // namespace signbench
