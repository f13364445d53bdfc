#include <gtest/gtest.h>

#include <set>

#include "srrn/scenes.hpp"

namespace srrn {
namespace {

TEST(Scenes, DeterministicPerIndex) {
  SceneOptions o;
  o.seed = 4;
  EXPECT_EQ(make_background_scene(o, 3).image, make_background_scene(o, 3).image);
  EXPECT_NE(make_background_scene(o, 3).image, make_background_scene(o, 4).image);
  EXPECT_EQ(make_reflection_scene(o, 1).image, make_reflection_scene(o, 1).image);
}

TEST(Scenes, LabelsWithinClassCount) {
  SceneOptions o;
  o.class_count = 6;
  std::set<int> seen;
  for (std::size_t i = 0; i < 20; ++i) {
    const LabeledImage s = make_background_scene(o, i);
    EXPECT_EQ(s.image.height(), o.size);
    for (auto l : s.label.labels()) {
      EXPECT_LT(l, 6);
      seen.insert(l);
    }
  }
  EXPECT_GE(seen.size(), 4u);
  EXPECT_TRUE(seen.contains(0));
}

TEST(Scenes, ClassColorsDistinct) {
  for (int k : {6, 21}) {
    std::set<std::array<double, 3>> colors;
    for (int c = 0; c < k; ++c) colors.insert(class_color(c, k));
    EXPECT_EQ(colors.size(), static_cast<std::size_t>(k));
  }
}

TEST(Scenes, RejectsTinyScenes) {
  SceneOptions o;
  o.size = 4;
  EXPECT_ANY_THROW(make_background_scene(o, 0));
}

}  // namespace
}  // namespace srrn
