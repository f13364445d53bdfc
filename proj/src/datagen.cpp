#include "srrn/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "srrn/error.hpp"
#include "srrn/image_io.hpp"
#include "srrn/random.hpp"

namespace srrn {
namespace {

void require_same_size(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (!a.same_size(b)) {
    fail(ErrorCode::dimension_mismatch,
         fmt::format("{}: {}x{} vs {}x{}", what, a.height(), a.width(), b.height(), b.width()));
  }
}

void require_sources(const std::vector<LabeledImage>& backgrounds, const std::vector<SourceImage>& reflections) {
  if (backgrounds.empty()) fail(ErrorCode::empty_input, "no background source images");
  if (reflections.empty()) fail(ErrorCode::empty_input, "no reflection source images");
}

// Stream ids inside a record's seed space.
enum Stream : std::uint64_t { pick_background = 1, pick_reflection, crop_background, crop_reflection, pick_alpha };

struct Pairing {
  std::size_t background = 0;
  std::size_t reflection = 0;
  ImageTensor b;
  ImageTensor r;
  SemanticMap s;
};

Pairing make_pairing(const std::vector<LabeledImage>& backgrounds, const std::vector<SourceImage>& reflections,
                     int crop_size, std::uint64_t record_seed) {
  Pairing p;
  p.background = Rng(derive_seed(record_seed, {pick_background})).below(backgrounds.size());
  p.reflection = Rng(derive_seed(record_seed, {pick_reflection})).below(reflections.size());
  const LabeledImage& bg = backgrounds[p.background];
  const SourceImage& rf = reflections[p.reflection];
  auto b = random_crop(bg.image, bg.label, crop_size, derive_seed(record_seed, {crop_background}));
  auto r = random_crop(rf.image, std::nullopt, crop_size, derive_seed(record_seed, {crop_reflection}));
  p.b = std::move(b.image);
  p.s = std::move(*b.label);
  p.r = std::move(r.image);
  return p;
}

}  // namespace

ImageTensor blend(const ImageTensor& background, const ImageTensor& reflection, double alpha) {
  require_same_size(background, reflection, "blend dimension mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::invalid_argument, fmt::format("alpha {} outside [0, 1]", alpha));
  Planes out(3, background.height(), background.width());
  const auto b = background.data();
  const auto r = reflection.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp((1.0 - alpha) * b[i] + alpha * r[i], 0.0, 1.0);
  return ImageTensor(std::move(out));
}

ImageTensor derive_reflection(const ImageTensor& mixed, const ImageTensor& background) {
  require_same_size(mixed, background, "derive_reflection dimension mismatch");
  Planes out(3, mixed.height(), mixed.width());
  const auto m = mixed.data();
  const auto b = background.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(m[i] - b[i], 0.0, 1.0);
  return ImageTensor(std::move(out));
}

CropOffset crop_offset(int height, int width, int size, std::uint64_t seed) {
  if (size < 1) fail(ErrorCode::invalid_argument, "crop size must be >= 1");
  if (height < size || width < size) {
    fail(ErrorCode::invalid_argument, fmt::format("image {}x{} smaller than crop size {}", height, width, size));
  }
  Rng rng(seed);
  CropOffset off;
  off.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - size + 1)));
  off.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - size + 1)));
  return off;
}

ImageTensor crop(const ImageTensor& image, CropOffset offset, int size) {
  if (offset.y < 0 || offset.x < 0 || offset.y + size > image.height() || offset.x + size > image.width()) {
    fail(ErrorCode::invalid_argument, "crop window outside image");
  }
  Planes out(3, size, size);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) out.at(c, y, x) = image.at(c, offset.y + y, offset.x + x);
    }
  }
  return ImageTensor(std::move(out));
}

SemanticMap crop(const SemanticMap& map, CropOffset offset, int size) {
  if (offset.y < 0 || offset.x < 0 || offset.y + size > map.height() || offset.x + size > map.width()) {
    fail(ErrorCode::invalid_argument, "crop window outside label map");
  }
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) labels[static_cast<std::size_t>(y) * size + x] = map.at(offset.y + y, offset.x + x);
  }
  return SemanticMap(size, size, std::move(labels), 256);
}

CroppedPair random_crop(const ImageTensor& image, const std::optional<SemanticMap>& label, int size,
                        std::uint64_t seed) {
  if (label && (label->height() != image.height() || label->width() != image.width())) {
    fail(ErrorCode::dimension_mismatch, "label and image differ in size");
  }
  CroppedPair out;
  out.offset = crop_offset(image.height(), image.width(), size, seed);
  out.image = crop(image, out.offset, size);
  if (label) out.label = crop(*label, out.offset, size);
  return out;
}

double AlphaSampler::sample(std::uint64_t seed) const {
  if (kind == Kind::fixed) return lo;
  return Rng(seed).uniform(lo, hi);
}

Quadruple synthesize_record(const std::vector<LabeledImage>& backgrounds, const std::vector<SourceImage>& reflections,
                            const AlphaSampler& alphas, int crop_size, std::uint64_t seed, std::size_t index,
                            RecordRef* ref) {
  require_sources(backgrounds, reflections);
  const std::uint64_t record_seed = derive_seed(seed, {index});
  Pairing p = make_pairing(backgrounds, reflections, crop_size, record_seed);
  const double alpha = alphas.sample(derive_seed(record_seed, {pick_alpha}));

  Quadruple q;
  q.id = fmt::format("syn_{:06d}", index);
  q.mixed = blend(p.b, p.r, alpha);
  q.background = std::move(p.b);
  q.reflection = std::move(p.r);
  q.semantic = std::move(p.s);
  q.alpha = alpha;
  q.source = DataSource::syn;
  if (ref) {
    ref->id = q.id;
    ref->mixed = "mixed/" + q.id + ".png";
    ref->background = "background/" + q.id + ".png";
    ref->reflection = "reflection/" + q.id + ".png";
    ref->semantic = "semantic/" + q.id + ".png";
    ref->alpha = alpha;
    ref->source = DataSource::syn;
    ref->split = Split::unassigned;
    ref->group = static_cast<std::int64_t>(index);
    ref->background_id = backgrounds[p.background].id;
    ref->reflection_id = reflections[p.reflection].id;
  }
  return q;
}

DatasetManifest synthesize_dataset(const std::vector<LabeledImage>& backgrounds,
                                   const std::vector<SourceImage>& reflections, std::size_t count,
                                   const AlphaSampler& alphas, const SynthesisOptions& options) {
  require_sources(backgrounds, reflections);
  if (count < 1) fail(ErrorCode::invalid_argument, "record count must be >= 1");
  DatasetManifest m;
  m.seed = options.seed;
  m.class_count = options.class_count;
  m.root = options.out_dir;
  m.records.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Quadruple q = synthesize_record(backgrounds, reflections, alphas, options.crop_size, options.seed, i,
                                          &m.records[i]);
    store_quadruple(q, options.out_dir, m.records[i]);
  }
  save_manifest(m, options.out_dir / options.manifest_name);
  return m;
}

DatasetManifest alpha_sweep(const std::vector<LabeledImage>& backgrounds, const std::vector<SourceImage>& reflections,
                            std::size_t pairs, const std::vector<double>& alphas, const SynthesisOptions& options) {
  require_sources(backgrounds, reflections);
  if (pairs < 1) fail(ErrorCode::invalid_argument, "pair count must be >= 1");
  if (alphas.empty()) fail(ErrorCode::invalid_argument, "alpha list is empty");
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) fail(ErrorCode::invalid_argument, fmt::format("alpha {} outside [0, 1]", a));
  }
  DatasetManifest m;
  m.seed = options.seed;
  m.class_count = options.class_count;
  m.root = options.out_dir;
  for (std::size_t p = 0; p < pairs; ++p) {
    Pairing pairing = make_pairing(backgrounds, reflections, options.crop_size, derive_seed(options.seed, {p}));
    const std::string stem = fmt::format("pair_{:06d}", p);
    RecordRef base;
    base.background = "background/" + stem + ".png";
    base.reflection = "reflection/" + stem + ".png";
    base.semantic = "semantic/" + stem + ".png";
    base.source = DataSource::syn;
    base.group = static_cast<std::int64_t>(p);
    base.background_id = backgrounds[pairing.background].id;
    base.reflection_id = reflections[pairing.reflection].id;
    save_image(pairing.b, options.out_dir / base.background);
    save_image(pairing.r, options.out_dir / base.reflection);
    save_semantic_map(pairing.s, options.out_dir / base.semantic);
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      RecordRef r = base;
      r.id = fmt::format("{}_a{:02d}", stem, k);
      r.mixed = "mixed/" + r.id + ".png";
      r.alpha = alphas[k];
      save_image(blend(pairing.b, pairing.r, alphas[k]), options.out_dir / r.mixed);
      m.records.push_back(std::move(r));
    }
  }
  save_manifest(m, options.out_dir / options.manifest_name);
  return m;
}

std::vector<double> parse_alpha_grid(const std::string& spec) {
  double lo = 0, hi = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    fail(ErrorCode::invalid_argument, fmt::format("alpha grid '{}' is not lo:hi:step", spec));
  }
  if (!(step > 0.0) || hi < lo) fail(ErrorCode::invalid_argument, fmt::format("bad alpha grid '{}'", spec));
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) {
    // Round to 12 digits so 0.1 + 2*0.1 prints as 0.3 in manifests.
    out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return out;
}

std::vector<LabeledImage> load_labeled_images(const std::filesystem::path& image_dir,
                                              const std::filesystem::path& label_dir, int class_count) {
  std::map<std::string, std::filesystem::path> images;
  if (!std::filesystem::is_directory(image_dir)) {
    fail(ErrorCode::file_not_found, fmt::format("no such directory: {}", image_dir.string()));
  }
  for (const auto& entry : std::filesystem::directory_iterator(image_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") images[entry.path().stem().string()] = entry.path();
  }
  std::vector<LabeledImage> out;
  for (const auto& [stem, path] : images) {
    LabeledImage li;
    li.id = stem;
    li.image = load_image(path);
    li.label = load_semantic_map(label_dir / (stem + ".png"), class_count);
    if (li.label.height() != li.image.height() || li.label.width() != li.image.width()) {
      fail(ErrorCode::dimension_mismatch, fmt::format("label for {} does not match image size", stem));
    }
    out.push_back(std::move(li));
  }
  return out;
}

std::vector<SourceImage> load_source_images(const std::filesystem::path& dir) {
  std::map<std::string, std::filesystem::path> images;
  if (!std::filesystem::is_directory(dir)) {
    fail(ErrorCode::file_not_found, fmt::format("no such directory: {}", dir.string()));
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") images[entry.path().stem().string()] = entry.path();
  }
  std::vector<SourceImage> out;
  for (const auto& [stem, path] : images) out.push_back({stem, load_image(path)});
  return out;
}

}  // namespace srrn
