#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lfo/json_io.hpp"
#include "lfo/taskgen.hpp"

namespace lfo {

void to_json(Json& j, const EnvConfig& c) {
  j = Json{{"link1", c.link1},
           {"link2", c.link2},
           {"torque_limit", c.torque_limit},
           {"damping", c.damping},
           {"target_radius", c.target_radius},
           {"hold_frames", c.hold_frames},
           {"episode_length", c.episode_length},
           {"image_size", c.image_size},
           {"num_targets", c.num_targets},
           {"kp", c.kp},
           {"kd", c.kd},
           {"palette", c.palette}};
}

void from_json(const Json& j, EnvConfig& c) {
  j.at("link1").get_to(c.link1);
  j.at("link2").get_to(c.link2);
  j.at("torque_limit").get_to(c.torque_limit);
  j.at("damping").get_to(c.damping);
  j.at("target_radius").get_to(c.target_radius);
  j.at("hold_frames").get_to(c.hold_frames);
  j.at("episode_length").get_to(c.episode_length);
  j.at("image_size").get_to(c.image_size);
  j.at("num_targets").get_to(c.num_targets);
  j.at("kp").get_to(c.kp);
  j.at("kd").get_to(c.kd);
  j.at("palette").get_to(c.palette);
}

void to_json(Json& j, const Target& t) {
  j = Json{{"color", t.color}, {"x", t.x}, {"y", t.y}};
}

void from_json(const Json& j, Target& t) {
  j.at("color").get_to(t.color);
  j.at("x").get_to(t.x);
  j.at("y").get_to(t.y);
}

void to_json(Json& j, const TaskSpec& t) {
  j = Json{{"targets", t.target_colors}, {"distractors", t.distractor_colors}};
}

void from_json(const Json& j, TaskSpec& t) {
  j.at("targets").get_to(t.target_colors);
  j.at("distractors").get_to(t.distractor_colors);
}

namespace {

constexpr char kMagic[4] = {'L', 'F', 'O', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, std::size_t& offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) {
    throw FormatError("truncated dataset file at byte " + std::to_string(offset));
  }
  offset += 4;
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, const float* data, std::size_t count) {
  // little-endian host; floats serialized byte for byte
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
}

void get_f32(std::istream& in, float* data, std::size_t count, std::size_t& offset) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 4));
  if (in.gcount() != static_cast<std::streamsize>(count * 4)) {
    throw FormatError("truncated dataset file at byte " +
                      std::to_string(offset + static_cast<std::size_t>(in.gcount())));
  }
  offset += count * 4;
}

}  // namespace

void save_dataset(const std::string& path, const DatasetManifest& manifest,
                  const std::vector<LabeledVideo>& videos) {
  manifest.validate();
  Json header;
  header["split"] = split_name(manifest.split);
  header["seed"] = manifest.seed;
  header["videos_per_task"] = manifest.videos_per_task;
  header["snippet_length"] = manifest.snippet_length;
  header["env"] = manifest.env;
  header["tasks"] = manifest.tasks;
  Json vids = Json::array();
  for (const LabeledVideo& v : videos) {
    vids.push_back(Json{{"task_id", v.task_id},
                        {"order", v.order},
                        {"frame_labels", v.frame_labels},
                        {"snippet_labels", v.snippet_labels},
                        {"targets", v.targets},
                        {"frame_count", v.frames.size()}});
  }
  header["videos"] = std::move(vids);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open dataset file for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const LabeledVideo& v : videos) {
    for (const Frame& f : v.frames) put_f32(out, f.pixels.data(), f.pixels.size());
  }
  for (const LabeledVideo& v : videos) {
    for (const auto& s : v.states) put_f32(out, s.data(), 4);
  }
  for (const LabeledVideo& v : videos) {
    for (const auto& a : v.actions) put_f32(out, a.data(), 2);
  }
  if (!out) throw DataError("dataset write failed: " + path);
}

LoadedDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing dataset file: " + path);
  std::size_t offset = 0;
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad dataset magic in " + path);
  }
  offset += 4;
  const std::uint32_t version = get_u32(in, offset);
  if (version != kVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version));
  }
  const std::uint32_t header_len = get_u32(in, offset);
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  if (in.gcount() != static_cast<std::streamsize>(header_len)) {
    throw FormatError("truncated dataset file at byte " +
                      std::to_string(offset + static_cast<std::size_t>(in.gcount())));
  }
  offset += header_len;
  Json header;
  try {
    header = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("unreadable dataset header: ") + e.what());
  }

  LoadedDataset ds;
  try {
    ds.manifest.split = split_from_name(header.at("split").get<std::string>());
    ds.manifest.seed = header.at("seed").get<std::uint64_t>();
    ds.manifest.videos_per_task = header.at("videos_per_task").get<int>();
    ds.manifest.snippet_length = header.at("snippet_length").get<int>();
    ds.manifest.env = header.at("env").get<EnvConfig>();
    ds.manifest.tasks = header.at("tasks").get<std::vector<TaskSpec>>();
    const int w = ds.manifest.env.image_size;
    for (const Json& jv : header.at("videos")) {
      LabeledVideo v;
      v.task_id = jv.at("task_id").get<int>();
      v.order = jv.at("order").get<std::vector<int>>();
      v.frame_labels = jv.at("frame_labels").get<std::vector<int>>();
      v.snippet_labels = jv.at("snippet_labels").get<std::vector<int>>();
      v.targets = jv.at("targets").get<std::vector<Target>>();
      const std::size_t frame_count = jv.at("frame_count").get<std::size_t>();
      v.frames.resize(frame_count);
      v.states.resize(frame_count);
      v.actions.resize(frame_count);
      for (Frame& f : v.frames) {
        f.width = w;
        f.height = w;
        f.pixels.resize(static_cast<std::size_t>(w) * w * 3);
      }
      ds.videos.push_back(std::move(v));
    }
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed dataset header: ") + e.what());
  }
  for (LabeledVideo& v : ds.videos) {
    for (Frame& f : v.frames) get_f32(in, f.pixels.data(), f.pixels.size(), offset);
  }
  for (LabeledVideo& v : ds.videos) {
    for (auto& s : v.states) get_f32(in, s.data(), 4, offset);
  }
  for (LabeledVideo& v : ds.videos) {
    for (auto& a : v.actions) get_f32(in, a.data(), 2, offset);
  }
  return ds;
}

}  // namespace lfo
