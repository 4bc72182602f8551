#include "ictext/dataio.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "ictext/classes.hpp"
#include "ictext/errors.hpp"

namespace ictext {

using nlohmann::json;

void ImageRecord::validate() const {
  dims.validate();
  for (std::size_t i = 0; i < chars.size(); ++i) {
    const auto& c = chars[i];
    c.box.validate();
    if (!is_valid_class(c.class_id)) {
      throw ValidationError("char " + std::to_string(i) + " has an out-of-range class id");
    }
    if (c.box.x1 < 0.0 || c.box.y1 < 0.0 || c.box.x2 > dims.width || c.box.y2 > dims.height) {
      throw ValidationError("char " + std::to_string(i) + " box lies outside the image");
    }
    if (!std::isfinite(c.rotation_deg)) {
      throw ValidationError("char " + std::to_string(i) + " has a non-finite rotation");
    }
  }
}

namespace {

// ---------------------------------------------------------------------------
// Canonical writer

std::string format_double(double v) {
  if (!std::isfinite(v)) throw SerializationError("cannot serialize a non-finite number");
  if (v == 0.0) return "0";  // folds -0.0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class JsonOut {
 public:
  JsonOut& begin_object() { return open('{'); }
  JsonOut& end_object() { return close('}'); }
  JsonOut& begin_array() { return open('['); }
  JsonOut& end_array() { return close(']'); }

  JsonOut& key(const std::string& k) {
    separate();
    s_ += json(k).dump();
    s_ += ':';
    after_key_ = true;
    return *this;
  }
  JsonOut& number(double v) { return raw(format_double(v)); }
  JsonOut& integer(long long v) { return raw(std::to_string(v)); }
  JsonOut& unsigned_integer(unsigned long long v) { return raw(std::to_string(v)); }
  JsonOut& string(const std::string& v) { return raw(json(v).dump()); }

  const std::string& str() const { return s_; }

 private:
  JsonOut& raw(const std::string& text) {
    separate();
    s_ += text;
    return *this;
  }
  JsonOut& open(char c) {
    separate();
    s_ += c;
    first_.push_back(true);
    return *this;
  }
  JsonOut& close(char c) {
    s_ += c;
    first_.pop_back();
    return *this;
  }
  void separate() {
    if (after_key_) {
      after_key_ = false;
      return;
    }
    if (!first_.empty()) {
      if (!first_.back()) s_ += ',';
      first_.back() = false;
    }
  }

  std::string s_;
  std::vector<bool> first_;
  bool after_key_ = false;
};

void write_bbox(JsonOut& j, const BoxXYXY& b) {
  j.key("bbox").begin_array();
  j.number(b.x1).number(b.y1).number(b.x2 - b.x1).number(b.y2 - b.y1);
  j.end_array();
}

std::string class_string(int class_id) { return std::string(1, class_char(class_id)); }

std::string ground_truth_line(const ImageRecord& r) {
  JsonOut j;
  j.begin_object();
  j.key("image_id").string(r.image_id);
  j.key("width").integer(r.dims.width);
  j.key("height").integer(r.dims.height);
  j.key("chars").begin_array();
  for (const auto& c : r.chars) {
    j.begin_object();
    write_bbox(j, c.box);
    j.key("rotation").number(c.rotation_deg);
    j.key("class").string(class_string(c.class_id));
    j.key("aesthetic").begin_array();
    for (bool b : c.aesthetic) j.integer(b ? 1 : 0);
    j.end_array();
    j.end_object();
  }
  j.end_array();
  j.end_object();
  return j.str();
}

std::string predictions_line(const ImagePredictions& p) {
  JsonOut j;
  j.begin_object();
  j.key("image_id").string(p.image_id);
  j.key("dets").begin_array();
  for (const auto& d : p.dets) {
    j.begin_object();
    write_bbox(j, d.box);
    j.key("score").number(d.score);
    j.key("class").string(class_string(d.class_id));
    if (d.aesthetic_scores) {
      j.key("aesthetic_scores").begin_array();
      for (double a : *d.aesthetic_scores) j.number(a);
      j.end_array();
    }
    if (d.source_id) j.key("source_id").integer(*d.source_id);
    j.end_object();
  }
  j.end_array();
  j.end_object();
  return j.str();
}

// ---------------------------------------------------------------------------
// Reader helpers

class FieldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const json& field(const json& obj, const char* name, const std::string& ctx) {
  if (!obj.is_object()) throw FieldError(ctx + ": expected a JSON object");
  const auto it = obj.find(name);
  if (it == obj.end()) throw FieldError(ctx + ": missing field '" + name + "'");
  return *it;
}

std::string sub(const std::string& ctx, const std::string& name) {
  return ctx.empty() ? name : ctx + "." + name;
}

double as_number(const json& v, const std::string& ctx) {
  if (!v.is_number()) throw FieldError("field '" + ctx + "': expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw FieldError("field '" + ctx + "': non-finite number");
  return d;
}

int as_int(const json& v, const std::string& ctx) {
  if (!v.is_number_integer()) throw FieldError("field '" + ctx + "': expected an integer");
  const auto i = v.get<long long>();
  if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
    throw FieldError("field '" + ctx + "': integer out of range");
  }
  return static_cast<int>(i);
}

std::string as_string(const json& v, const std::string& ctx) {
  if (!v.is_string()) throw FieldError("field '" + ctx + "': expected a string");
  return v.get<std::string>();
}

const json& as_array(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw FieldError("field '" + ctx + "': expected an array");
  return v;
}

int parse_class(const json& v, const std::string& ctx) {
  const std::string s = as_string(v, ctx);
  const auto idx = s.size() == 1 ? class_index(s[0]) : std::nullopt;
  if (!idx) throw FieldError("field '" + ctx + "': unknown class \"" + s + "\"");
  return *idx;
}

BoxXYXY parse_bbox(const json& v, const std::string& ctx) {
  const json& a = as_array(v, ctx);
  if (a.size() != 4) throw FieldError("field '" + ctx + "': bbox must have 4 numbers [x,y,w,h]");
  const double x = as_number(a[0], ctx + "[0]");
  const double y = as_number(a[1], ctx + "[1]");
  const double w = as_number(a[2], ctx + "[2]");
  const double h = as_number(a[3], ctx + "[3]");
  if (w < 0.0 || h < 0.0) throw FieldError("field '" + ctx + "': negative width or height");
  return BoxXYXY::from_xywh(x, y, w, h);
}

bool parse_bit(const json& v, const std::string& ctx) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    const auto i = v.get<long long>();
    if (i == 0 || i == 1) return i == 1;
  }
  throw FieldError("field '" + ctx + "': expected 0 or 1");
}

ImageRecord parse_ground_truth(const json& obj) {
  ImageRecord r;
  r.image_id = as_string(field(obj, "image_id", "record"), "image_id");
  r.dims.width = as_int(field(obj, "width", "record"), "width");
  r.dims.height = as_int(field(obj, "height", "record"), "height");
  if (r.dims.width < 1 || r.dims.height < 1) {
    throw FieldError("field 'width'/'height': image dimensions must be positive");
  }
  const json& chars = as_array(field(obj, "chars", "record"), "chars");
  for (std::size_t i = 0; i < chars.size(); ++i) {
    const std::string ctx = "chars[" + std::to_string(i) + "]";
    const json& c = chars[i];
    GroundTruthChar gt;
    gt.box = parse_bbox(field(c, "bbox", ctx), sub(ctx, "bbox"));
    gt.rotation_deg = as_number(field(c, "rotation", ctx), sub(ctx, "rotation"));
    gt.class_id = parse_class(field(c, "class", ctx), sub(ctx, "class"));
    const json& aes = as_array(field(c, "aesthetic", ctx), sub(ctx, "aesthetic"));
    if (aes.size() != 3) {
      throw FieldError("field '" + sub(ctx, "aesthetic") + "': expected 3 entries, got " +
                       std::to_string(aes.size()));
    }
    for (std::size_t k = 0; k < 3; ++k) {
      gt.aesthetic[k] = parse_bit(aes[k], sub(ctx, "aesthetic") + "[" + std::to_string(k) + "]");
    }
    if (gt.box.x1 < 0.0 || gt.box.y1 < 0.0 || gt.box.x2 > r.dims.width ||
        gt.box.y2 > r.dims.height) {
      throw FieldError("field '" + sub(ctx, "bbox") + "': box outside the " +
                       std::to_string(r.dims.width) + "x" + std::to_string(r.dims.height) +
                       " image");
    }
    r.chars.push_back(gt);
  }
  return r;
}

ImagePredictions parse_predictions(const json& obj) {
  ImagePredictions p;
  p.image_id = as_string(field(obj, "image_id", "record"), "image_id");
  const json& dets = as_array(field(obj, "dets", "record"), "dets");
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const std::string ctx = "dets[" + std::to_string(i) + "]";
    const json& dj = dets[i];
    Detection d;
    d.box = parse_bbox(field(dj, "bbox", ctx), sub(ctx, "bbox"));
    d.score = as_number(field(dj, "score", ctx), sub(ctx, "score"));
    if (d.score < 0.0 || d.score > 1.0) {
      throw FieldError("field '" + sub(ctx, "score") + "': score outside [0, 1]");
    }
    d.class_id = parse_class(field(dj, "class", ctx), sub(ctx, "class"));
    if (const auto it = dj.find("aesthetic_scores"); it != dj.end()) {
      const std::string actx = sub(ctx, "aesthetic_scores");
      const json& a = as_array(*it, actx);
      if (a.size() != 3) throw FieldError("field '" + actx + "': expected 3 entries");
      AestheticScores s{};
      for (std::size_t k = 0; k < 3; ++k) {
        s[k] = as_number(a[k], actx + "[" + std::to_string(k) + "]");
        if (s[k] < 0.0 || s[k] > 1.0) throw FieldError("field '" + actx + "': score outside [0, 1]");
      }
      d.aesthetic_scores = s;
    }
    if (const auto it = dj.find("source_id"); it != dj.end()) {
      d.source_id = as_int(*it, sub(ctx, "source_id"));
    }
    p.dets.push_back(d);
  }
  return p;
}

// Calls fn(json, line_number) for every non-blank line.
template <typename Fn>
void for_each_json_line(std::istream& in, const std::string& name, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(name, number, std::string("malformed JSON: ") + e.what());
    }
    try {
      fn(obj, number);
    } catch (const FieldError& e) {
      throw ParseError(name, number, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(name, number, e.what());
    }
  }
  if (in.bad()) throw IoError(name + ": read failed");
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  return in;
}

json load_json_document(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Ground truth

std::vector<ImageRecord> read_ground_truth(std::istream& in, const std::string& name) {
  std::vector<ImageRecord> records;
  std::unordered_map<std::string, std::size_t> seen;
  for_each_json_line(in, name, [&](const json& obj, std::size_t line) {
    ImageRecord r = parse_ground_truth(obj);
    if (const auto [it, inserted] = seen.emplace(r.image_id, line); !inserted) {
      throw FieldError("field 'image_id': duplicate id \"" + r.image_id + "\" (first on line " +
                       std::to_string(it->second) + ")");
    }
    records.push_back(std::move(r));
  });
  return records;
}

void write_ground_truth(std::ostream& out, std::span<const ImageRecord> records) {
  std::string text;
  for (const auto& r : records) {
    r.validate();
    text += ground_truth_line(r);
    text += '\n';
  }
  out << text;
}

std::vector<ImageRecord> load_ground_truth(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_ground_truth(in, path.string());
}

void save_ground_truth(std::span<const ImageRecord> records, const std::filesystem::path& path) {
  std::ostringstream out;
  write_ground_truth(out, records);
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Predictions

PredictionFile read_predictions(std::istream& in, const std::string& name) {
  PredictionFile file;
  std::unordered_map<std::string, std::size_t> index;
  for_each_json_line(in, name, [&](const json& obj, std::size_t) {
    ImagePredictions p = parse_predictions(obj);
    if (const auto it = index.find(p.image_id); it != index.end()) {
      auto& dst = file.images[it->second].dets;
      dst.insert(dst.end(), p.dets.begin(), p.dets.end());
      ++file.merged_duplicates;
      return;
    }
    index.emplace(p.image_id, file.images.size());
    file.images.push_back(std::move(p));
  });
  return file;
}

void write_predictions(std::ostream& out, std::span<const ImagePredictions> images) {
  std::string text;
  for (const auto& p : images) {
    for (const auto& d : p.dets) d.validate();
    text += predictions_line(p);
    text += '\n';
  }
  out << text;
}

PredictionFile load_predictions(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_predictions(in, path.string());
}

void save_predictions(std::span<const ImagePredictions> images, const std::filesystem::path& path) {
  std::ostringstream out;
  write_predictions(out, images);
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Reports

std::string to_json(const DetEvalReport& r) {
  JsonOut j;
  j.begin_object();
  j.key("ap").number(r.ap);
  j.key("ap50").number(r.ap50);
  j.key("ap75").number(r.ap75);
  j.key("iou_thresholds").begin_array();
  for (double t : r.iou_thresholds) j.number(t);
  j.end_array();
  j.key("num_images").unsigned_integer(r.num_images);
  j.key("num_gt").unsigned_integer(r.num_gt);
  j.key("num_dets").unsigned_integer(r.num_dets);
  j.key("per_class").begin_array();
  for (const auto& c : r.per_class) {
    j.begin_object();
    j.key("class").string(class_string(c.class_id));
    j.key("class_id").integer(c.class_id);
    j.key("num_gt").unsigned_integer(c.num_gt);
    j.key("num_dets").unsigned_integer(c.num_dets);
    j.key("ap").number(c.ap);
    j.key("ap50").number(c.ap50);
    j.key("ap75").number(c.ap75);
    j.end_object();
  }
  j.end_array();
  j.end_object();
  return j.str() + "\n";
}

std::string to_json(const AesEvalReport& r) {
  static constexpr const char* kLabels[3] = {"blurry", "low_contrast", "broken"};
  JsonOut j;
  j.begin_object();
  j.key("precision").number(r.precision);
  j.key("recall").number(r.recall);
  j.key("f2").number(r.f2);
  j.key("matched_pairs").unsigned_integer(r.matched_pairs);
  j.key("labels").begin_array();
  for (std::size_t k = 0; k < 3; ++k) {
    j.begin_object();
    j.key("label").string(kLabels[k]);
    j.key("tp").unsigned_integer(r.tp[k]);
    j.key("fp").unsigned_integer(r.fp[k]);
    j.key("fn").unsigned_integer(r.fn[k]);
    j.end_object();
  }
  j.end_array();
  j.end_object();
  return j.str() + "\n";
}

std::string to_json(const S3Breakdown& r) {
  JsonOut j;
  j.begin_object();
  j.key("s3").number(r.s3);
  j.key("normalised_speed").number(r.normalised_speed);
  j.key("normalised_size").number(r.normalised_size);
  j.key("normalised_score").number(r.normalised_score);
  j.key("actual_fps").number(r.actual_fps);
  j.key("allocated_mb").number(r.allocated_mb);
  j.key("acceptable_fps").number(r.acceptable_fps);
  j.key("acceptable_mb").number(r.acceptable_mb);
  j.end_object();
  return j.str() + "\n";
}

std::string to_json(const RepeatFactorPlan& p) {
  JsonOut j;
  j.begin_object();
  j.key("threshold").number(p.threshold);
  j.key("seed").unsigned_integer(p.seed);
  j.key("epoch_length").unsigned_integer(p.epoch.size());
  j.key("factors").begin_object();
  for (const auto& [id, r] : p.factors) j.key(id).number(r);
  j.end_object();
  j.key("epoch").begin_array();
  for (const auto& id : p.epoch) j.string(id);
  j.end_array();
  j.end_object();
  return j.str() + "\n";
}

std::string to_json(const FeatureGrid& g) {
  JsonOut j;
  j.begin_object();
  j.key("shape").begin_array().unsigned_integer(g.slots()).unsigned_integer(g.channels()).end_array();
  j.key("data").begin_array();
  for (double v : g.data()) j.number(v);
  j.end_array();
  j.end_object();
  return j.str() + "\n";
}

void save_report(const DetEvalReport& report, const std::filesystem::path& path) {
  write_text_file(path, to_json(report));
}

void save_report(const AesEvalReport& report, const std::filesystem::path& path) {
  write_text_file(path, to_json(report));
}

void save_report(const S3Breakdown& report, const std::filesystem::path& path) {
  write_text_file(path, to_json(report));
}

void save_plan(const RepeatFactorPlan& plan, const std::filesystem::path& path) {
  write_text_file(path, to_json(plan));
}

RepeatFactorPlan load_plan(const std::filesystem::path& path) {
  const json doc = load_json_document(path);
  try {
    RepeatFactorPlan plan;
    plan.threshold = as_number(field(doc, "threshold", "plan"), "threshold");
    const json& seed = field(doc, "seed", "plan");
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
      throw FieldError("field 'seed': expected a non-negative integer");
    }
    plan.seed = seed.get<std::uint64_t>();
    const json& factors = field(doc, "factors", "plan");
    if (!factors.is_object()) throw FieldError("field 'factors': expected an object");
    for (const auto& [id, r] : factors.items()) plan.factors.emplace(id, as_number(r, "factors." + id));
    const json& epoch = as_array(field(doc, "epoch", "plan"), "epoch");
    for (const auto& id : epoch) plan.epoch.push_back(as_string(id, "epoch"));
    return plan;
  } catch (const FieldError& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

FeatureGrid load_feature_grid(const std::filesystem::path& path) {
  const json doc = load_json_document(path);
  try {
    const json& shape = as_array(field(doc, "shape", "grid"), "shape");
    if (shape.size() != 2 || !shape[0].is_number_unsigned() || !shape[1].is_number_unsigned()) {
      throw FieldError("field 'shape': expected [slots, channels]");
    }
    const json& data = as_array(field(doc, "data", "grid"), "data");
    std::vector<double> values;
    values.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      values.push_back(as_number(data[i], "data[" + std::to_string(i) + "]"));
    }
    return FeatureGrid(shape[0].get<std::size_t>(), shape[1].get<std::size_t>(), std::move(values));
  } catch (const FieldError& e) {
    throw ParseError(path.string(), 0, e.what());
  } catch (const LayoutError& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void save_feature_grid(const FeatureGrid& grid, const std::filesystem::path& path) {
  write_text_file(path, to_json(grid));
}

DistillMask load_mask(const std::filesystem::path& path) {
  const json doc = load_json_document(path);
  try {
    const json& values = as_array(field(doc, "mask", "mask"), "mask");
    DistillMask mask;
    mask.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      mask.push_back(parse_bit(values[i], "mask[" + std::to_string(i) + "]") ? 1 : 0);
    }
    return mask;
  } catch (const FieldError& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

void save_mask(std::span<const std::uint8_t> mask, const std::filesystem::path& path) {
  JsonOut j;
  j.begin_object();
  j.key("mask").begin_array();
  for (auto m : mask) j.integer(m ? 1 : 0);
  j.end_array();
  j.end_object();
  write_text_file(path, j.str() + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw IoError(path.string() + ": write failed");
}

}  // namespace ictext
