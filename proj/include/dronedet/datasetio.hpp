#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dronedet/boxes.hpp"
#include "dronedet/errors.hpp"
#include "dronedet/rng.hpp"

namespace dronedet {

enum class Source { RealWorld, DetFly, Midgard, DroneVsBird, UscDrone };
enum class Scenario { Untagged, Indoor, Urban, Countryside };

inline const char* source_name(Source s) {
  switch (s) {
    case Source::RealWorld: return "real_world";
    case Source::DetFly: return "det_fly";
    case Source::Midgard: return "midgard";
    case Source::DroneVsBird: return "drone_vs_bird";
    case Source::UscDrone: return "usc_drone";
  }
  return "?";
}

inline std::optional<Source> source_from_name(const std::string& s) {
  for (Source v : {Source::RealWorld, Source::DetFly, Source::Midgard,
                   Source::DroneVsBird, Source::UscDrone})
    if (s == source_name(v)) return v;
  return std::nullopt;
}

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::Untagged: return "-";
    case Scenario::Indoor: return "indoor";
    case Scenario::Urban: return "urban";
    case Scenario::Countryside: return "countryside";
  }
  return "?";
}

inline std::optional<Scenario> scenario_from_name(const std::string& s) {
  for (Scenario v : {Scenario::Untagged, Scenario::Indoor, Scenario::Urban,
                     Scenario::Countryside})
    if (s == scenario_name(v)) return v;
  return std::nullopt;
}

// Detection difficulty by scenario: indoor hardest, countryside easiest.
inline int scenario_difficulty(Scenario s) {
  switch (s) {
    case Scenario::Indoor: return 3;
    case Scenario::Urban: return 2;
    case Scenario::Countryside: return 1;
    case Scenario::Untagged: return 0;
  }
  return 0;
}

struct AnnotationBox {
  Box box;  // pixel coordinates
  std::string class_name = "drone";
  bool operator==(const AnnotationBox&) const = default;
};

struct AnnotationRecord {
  std::string image_id;
  std::string image_path;
  int width = 0;
  int height = 0;
  std::vector<AnnotationBox> boxes;
  Source source = Source::RealWorld;
  Scenario scenario = Scenario::Untagged;
  std::string scenario_hint;  // raw source metadata, e.g. a sort label
  bool unreliable = false;    // shared multi-frame labels and similar
  bool operator==(const AnnotationRecord&) const = default;
};

struct Reject {
  std::string file;
  int line = 0;
  std::string reason;
};

struct IngestResult {
  std::vector<AnnotationRecord> records;
  std::vector<Reject> rejects;
};

inline Box to_normalized(const Box& pixel, int width, int height) {
  return {pixel.x_min / width, pixel.y_min / height, pixel.x_max / width,
          pixel.y_max / height};
}

inline Box to_pixels(const Box& normalized, int width, int height) {
  return {normalized.x_min * width, normalized.y_min * height,
          normalized.x_max * width, normalized.y_max * height};
}

namespace detail {

inline std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

inline std::string fmt_coord(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Clamps a pixel box into the image; reports whether clamping changed it.
inline bool clamp_box(Box& b, int width, int height) {
  Box original = b;
  b.x_min = std::clamp(b.x_min, 0.0, static_cast<double>(width));
  b.x_max = std::clamp(b.x_max, 0.0, static_cast<double>(width));
  b.y_min = std::clamp(b.y_min, 0.0, static_cast<double>(height));
  b.y_max = std::clamp(b.y_max, 0.0, static_cast<double>(height));
  return !(b == original);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open '", path.string(), "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Canonical on-disk format: line-delimited UTF-8, one image per line after
// the schema tag. Tab-separated fields:
//   image_id  image_path  width  height  source  scenario  hint  unreliable
//   box_count  boxes
// where boxes is ';'-joined "class,x_min,y_min,x_max,y_max" (pixel coords,
// 17 significant digits) or "-" when the image has none.

inline std::string serialize_records(const std::vector<AnnotationRecord>& records) {
  std::ostringstream os;
  os << "dronedet.annotations.v1\n";
  for (const AnnotationRecord& r : records) {
    os << r.image_id << '\t' << r.image_path << '\t' << r.width << '\t'
       << r.height << '\t' << source_name(r.source) << '\t'
       << scenario_name(r.scenario) << '\t'
       << (r.scenario_hint.empty() ? "-" : r.scenario_hint) << '\t'
       << (r.unreliable ? 1 : 0) << '\t' << r.boxes.size() << '\t';
    if (r.boxes.empty()) {
      os << '-';
    } else {
      for (std::size_t i = 0; i < r.boxes.size(); ++i) {
        const AnnotationBox& b = r.boxes[i];
        os << (i ? ";" : "") << b.class_name << ','
           << detail::fmt_coord(b.box.x_min) << ','
           << detail::fmt_coord(b.box.y_min) << ','
           << detail::fmt_coord(b.box.x_max) << ','
           << detail::fmt_coord(b.box.y_max);
      }
    }
    os << '\n';
  }
  return os.str();
}

inline IngestResult parse_records(const std::string& text,
                                  const std::string& origin = "<memory>") {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "dronedet.annotations.v1")
    throw_io("annotation parse (", origin, "): missing schema tag");
  IngestResult result;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = detail::split_on(line, '\t');
    if (f.size() != 10) {
      result.rejects.push_back({origin, line_no,
                                detail::cat("expected 10 fields, got ", f.size())});
      continue;
    }
    AnnotationRecord r;
    try {
      r.image_id = f[0];
      r.image_path = f[1];
      r.width = std::stoi(f[2]);
      r.height = std::stoi(f[3]);
      auto src = source_from_name(f[4]);
      if (!src) throw ValueError(detail::cat("unknown source '", f[4], "'"));
      r.source = *src;
      auto sc = scenario_from_name(f[5]);
      if (!sc) throw ValueError(detail::cat("unknown scenario '", f[5], "'"));
      r.scenario = *sc;
      r.scenario_hint = (f[6] == "-") ? "" : f[6];
      r.unreliable = f[7] == "1";
      std::size_t n = std::stoul(f[8]);
      if (r.width <= 0 || r.height <= 0)
        throw ValueError("nonpositive image dimensions");
      if (f[9] != "-") {
        for (const std::string& part : detail::split_on(f[9], ';')) {
          std::vector<std::string> c = detail::split_on(part, ',');
          if (c.size() != 5)
            throw ValueError(detail::cat("bad box '", part, "'"));
          AnnotationBox b;
          b.class_name = c[0];
          b.box = {std::stod(c[1]), std::stod(c[2]), std::stod(c[3]),
                   std::stod(c[4])};
          r.boxes.push_back(b);
        }
      }
      if (r.boxes.size() != n)
        throw ValueError(detail::cat("declared ", n, " boxes, found ",
                                     r.boxes.size()));
    } catch (const std::exception& e) {
      result.rejects.push_back({origin, line_no, e.what()});
      continue;
    }
    for (AnnotationBox& b : r.boxes)
      if (detail::clamp_box(b.box, r.width, r.height))
        result.rejects.push_back(
            {origin, line_no,
             detail::cat("box outside image bounds clamped (", r.image_id, ")")});
    result.records.push_back(std::move(r));
  }
  return result;
}

inline void write_records(const std::vector<AnnotationRecord>& records,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_io("cannot open '", path, "' for writing");
  out << serialize_records(records);
  if (!out.good()) throw_io("write failed for '", path, "'");
}

// ---------------------------------------------------------------------------
// Source-layout adapters. Each reads a documented desk-scale text layout
// and normalizes into AnnotationRecord; malformed entries land in the
// rejects report instead of being silently dropped.

namespace detail {

// manifest.tsv: image_id <tab> relpath <tab> width <tab> height
// [<tab> location-label], one image per line; YOLO-style normalized boxes
// in labels/<image_id>.txt as "class cx cy w h".
inline IngestResult ingest_manifest_yolo(const std::filesystem::path& root,
                                         Source source, bool hint_column) {
  namespace fs = std::filesystem;
  IngestResult result;
  fs::path manifest = root / "manifest.tsv";
  if (!fs::exists(manifest)) return result;

  std::istringstream is(read_file(manifest));
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = split_on(line, '\t');
    if (f.size() < 4 || (hint_column && f.size() < 5)) {
      result.rejects.push_back({manifest.string(), line_no, "short manifest row"});
      continue;
    }
    AnnotationRecord r;
    r.image_id = f[0];
    r.image_path = f[1];
    r.source = source;
    if (hint_column) r.scenario_hint = f[4];
    try {
      r.width = std::stoi(f[2]);
      r.height = std::stoi(f[3]);
      if (r.width <= 0 || r.height <= 0)
        throw ValueError("nonpositive image dimensions");
    } catch (const std::exception& e) {
      result.rejects.push_back({manifest.string(), line_no, e.what()});
      continue;
    }

    fs::path label_file = root / "labels" / (r.image_id + ".txt");
    if (fs::exists(label_file)) {
      std::istringstream ls(read_file(label_file));
      std::string label_line;
      int label_no = 0;
      while (std::getline(ls, label_line)) {
        ++label_no;
        if (label_line.empty() || label_line[0] == '#') continue;
        std::istringstream vs(label_line);
        int cls;
        double cx, cy, w, h;
        if (!(vs >> cls >> cx >> cy >> w >> h)) {
          result.rejects.push_back({label_file.string(), label_no,
                                    "malformed yolo row"});
          continue;
        }
        if (w <= 0 || h <= 0) {
          result.rejects.push_back({label_file.string(), label_no,
                                    "nonpositive box size"});
          continue;
        }
        AnnotationBox b;
        b.box = to_pixels(Box::from_center_size(cx, cy, w, h), r.width,
                          r.height);
        if (clamp_box(b.box, r.width, r.height))
          result.rejects.push_back({label_file.string(), label_no,
                                    detail::cat("box outside image bounds "
                                                "clamped (", r.image_id, ")")});
        r.boxes.push_back(std::move(b));
      }
    }
    result.records.push_back(std::move(r));
  }
  return result;
}

// annotations.csv: relpath,width,height,x1,y1,x2,y2 — one box per line,
// repeated relpath accumulates boxes on one record.
inline IngestResult ingest_detfly_csv(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  IngestResult result;
  fs::path csv = root / "annotations.csv";
  if (!fs::exists(csv)) return result;

  std::map<std::string, std::size_t> index_of;
  std::istringstream is(read_file(csv));
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f = split_on(line, ',');
    if (f.size() != 7) {
      result.rejects.push_back({csv.string(), line_no, "expected 7 fields"});
      continue;
    }
    try {
      std::string rel = f[0];
      int width = std::stoi(f[1]);
      int height = std::stoi(f[2]);
      if (width <= 0 || height <= 0)
        throw ValueError("nonpositive image dimensions");
      Box box{std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
              std::stod(f[6])};
      if (box.width() <= 0 || box.height() <= 0)
        throw ValueError("nonpositive box size");

      auto it = index_of.find(rel);
      if (it == index_of.end()) {
        AnnotationRecord r;
        std::string id = rel;
        std::replace(id.begin(), id.end(), '/', '_');
        if (auto dot = id.rfind('.'); dot != std::string::npos)
          id = id.substr(0, dot);
        r.image_id = id;
        r.image_path = rel;
        r.width = width;
        r.height = height;
        r.source = Source::DetFly;
        index_of[rel] = result.records.size();
        result.records.push_back(std::move(r));
        it = index_of.find(rel);
      }
      AnnotationRecord& r = result.records[it->second];
      AnnotationBox b;
      b.box = box;
      if (clamp_box(b.box, r.width, r.height))
        result.rejects.push_back({csv.string(), line_no,
                                  detail::cat("box outside image bounds "
                                              "clamped (", r.image_id, ")")});
      r.boxes.push_back(std::move(b));
    } catch (const std::exception& e) {
      result.rejects.push_back({csv.string(), line_no, e.what()});
    }
  }
  return result;
}

// Per-clip text files: "#size W H" header, then either one frame per row
// ("frame x y w h", pixels, top-left + size) or — for the shared-label
// variant — a row that applies to `span` consecutive frames.
inline IngestResult ingest_clip_tracks(const std::filesystem::path& root,
                                       Source source, int span,
                                       bool unreliable) {
  namespace fs = std::filesystem;
  IngestResult result;
  if (!fs::is_directory(root)) return result;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  for (const fs::path& file : files) {
    std::string clip = file.stem().string();
    std::istringstream is(read_file(file));
    std::string line;
    int line_no = 0;
    int width = 0, height = 0;
    std::map<int, AnnotationRecord> by_frame;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (line.rfind("#size ", 0) == 0) {
        std::istringstream hs(line.substr(6));
        if (!(hs >> width >> height) || width <= 0 || height <= 0) {
          result.rejects.push_back({file.string(), line_no, "bad size header"});
          width = height = 0;
        }
        continue;
      }
      if (line[0] == '#') continue;
      if (width == 0) {
        result.rejects.push_back({file.string(), line_no,
                                  "track row before size header"});
        continue;
      }
      std::istringstream vs(line);
      int frame;
      double x, y, w, h;
      if (!(vs >> frame >> x >> y >> w >> h)) {
        result.rejects.push_back({file.string(), line_no, "malformed track row"});
        continue;
      }
      if (w <= 0 || h <= 0) {
        result.rejects.push_back({file.string(), line_no, "nonpositive box size"});
        continue;
      }
      for (int offset = 0; offset < span; ++offset) {
        int target = frame + offset;
        AnnotationRecord& r = by_frame[target];
        if (r.image_id.empty()) {
          r.image_id = detail::cat(clip, "_", target);
          r.image_path = detail::cat(clip, "/", target, ".jpg");
          r.width = width;
          r.height = height;
          r.source = source;
          r.unreliable = unreliable;
        }
        AnnotationBox b;
        b.box = {x, y, x + w, y + h};
        if (clamp_box(b.box, width, height))
          result.rejects.push_back({file.string(), line_no,
                                    detail::cat("box outside image bounds "
                                                "clamped (", r.image_id, ")")});
        r.boxes.push_back(std::move(b));
      }
    }
    for (auto& [frame, record] : by_frame)
      result.records.push_back(std::move(record));
  }
  return result;
}

}  // namespace detail

// Normalizes one of the recognized source layouts into annotation records.
// Layout names: canonical (root is a canonical-format file), real_world,
// midgard (manifest carries a location-label column), det_fly,
// drone_vs_bird, usc_drone (15-frame shared labels, marked unreliable).
inline IngestResult ingest(const std::string& source_layout,
                           const std::string& root_path) {
  if (source_layout == "canonical")
    return parse_records(detail::read_file(root_path), root_path);
  if (source_layout == "real_world")
    return detail::ingest_manifest_yolo(root_path, Source::RealWorld, false);
  if (source_layout == "midgard")
    return detail::ingest_manifest_yolo(root_path, Source::Midgard, true);
  if (source_layout == "det_fly") return detail::ingest_detfly_csv(root_path);
  if (source_layout == "drone_vs_bird")
    return detail::ingest_clip_tracks(root_path, Source::DroneVsBird, 1, false);
  if (source_layout == "usc_drone")
    return detail::ingest_clip_tracks(root_path, Source::UscDrone, 15, true);
  throw_value("ingest: unknown source layout '", source_layout, "'");
}

// ---------------------------------------------------------------------------

struct SplitResult {
  std::vector<AnnotationRecord> train;
  std::vector<AnnotationRecord> val;
};

// Seeded validation split, stratified per source. The global validation
// count is round(N * val_fraction) exactly; it is apportioned to sources by
// largest remainder, which keeps every source within one record of its own
// fraction. Output preserves the input order inside each side, so the split
// is a deterministic exact partition.
inline SplitResult split(const std::vector<AnnotationRecord>& records,
                         double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw_value("split: val_fraction must be in (0,1), got ", val_fraction);
  Rng rng(seed);

  std::vector<std::vector<std::size_t>> groups;
  for (Source source : {Source::RealWorld, Source::DetFly, Source::Midgard,
                        Source::DroneVsBird, Source::UscDrone}) {
    std::vector<std::size_t> indices;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].source == source) indices.push_back(i);
    if (!indices.empty()) groups.push_back(std::move(indices));
  }

  std::size_t target = static_cast<std::size_t>(
      std::lround(static_cast<double>(records.size()) * val_fraction));
  std::vector<std::size_t> quota(groups.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    double exact = static_cast<double>(groups[g].size()) * val_fraction;
    quota[g] = static_cast<std::size_t>(exact);
    quota[g] = std::min(quota[g], groups[g].size());
    assigned += quota[g];
    remainders.push_back({-(exact - static_cast<double>(quota[g])), g});
  }
  std::sort(remainders.begin(), remainders.end());
  for (const auto& [neg_rem, g] : remainders) {
    if (assigned >= target) break;
    if (quota[g] < groups[g].size()) {
      ++quota[g];
      ++assigned;
    }
  }

  std::vector<bool> is_val(records.size(), false);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    rng.shuffle(groups[g]);
    for (std::size_t i = 0; i < quota[g]; ++i) is_val[groups[g][i]] = true;
  }
  SplitResult out;
  for (std::size_t i = 0; i < records.size(); ++i)
    (is_val[i] ? out.val : out.train).push_back(records[i]);
  return out;
}

// ---------------------------------------------------------------------------

struct TagRule {
  std::optional<Source> source;  // restrict to one source when set
  std::string hint_substring;    // case-insensitive match on scenario_hint
  Scenario scenario = Scenario::Untagged;
};

inline std::vector<TagRule> default_tag_rules() {
  return {
      {Source::Midgard, "indoor", Scenario::Indoor},
      {Source::Midgard, "urban", Scenario::Urban},
      {Source::Midgard, "countryside", Scenario::Countryside},
      {std::nullopt, "indoor", Scenario::Indoor},
      {std::nullopt, "urban", Scenario::Urban},
      {std::nullopt, "countryside", Scenario::Countryside},
  };
}

// Attaches scenario tags from source metadata; records with no matching
// rule stay untagged.
inline std::vector<AnnotationRecord> tag_scenario(
    std::vector<AnnotationRecord> records,
    const std::vector<TagRule>& rules = default_tag_rules()) {
  for (AnnotationRecord& r : records) {
    if (r.scenario != Scenario::Untagged || r.scenario_hint.empty()) continue;
    std::string hint = detail::lower(r.scenario_hint);
    for (const TagRule& rule : rules) {
      if (rule.source && *rule.source != r.source) continue;
      if (rule.hint_substring.empty()) continue;
      if (hint.find(detail::lower(rule.hint_substring)) != std::string::npos) {
        r.scenario = rule.scenario;
        break;
      }
    }
  }
  return records;
}

}  // namespace dronedet
