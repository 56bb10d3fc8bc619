#include "priorsfm/io/scene_io.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "priorsfm/geometry/projection.h"
#include "priorsfm/util/errors.h"

namespace priorsfm {

namespace {

constexpr char kRasterMagic[4] = {'M', 'P', 'R', '1'};
constexpr size_t kRasterHeaderBytes = 20;

uint32_t ReadU32(const char* bytes) {
  uint32_t value = 0;
  std::memcpy(&value, bytes, sizeof(value));
  return value;
}

// Reads a whole file into memory; empty optional-style handling is not
// needed -- a missing file is already an error for every caller.
std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

void AtomicWriteBytes(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(tmp + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path + ": rename failed: " + ec.message());
}

// Splits text content into whitespace token rows, one per line, dropping
// `#` comments and blank lines. Keeps the source line number for messages.
struct TokenLine {
  int line = 0;
  std::vector<std::string> tokens;
};

std::vector<TokenLine> TokenizeLines(const std::string& content) {
  std::vector<TokenLine> rows;
  std::istringstream stream(content);
  std::string line;
  int number = 0;
  while (std::getline(stream, line)) {
    ++number;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    TokenLine row;
    row.line = number;
    std::string token;
    while (fields >> token) row.tokens.push_back(std::move(token));
    if (!row.tokens.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

[[noreturn]] void ThrowParse(const std::string& path, int line,
                             const std::string& message) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + message);
}

double ParseDouble(const std::string& path, int line,
                   const std::string& token) {
  size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &consumed);
  } catch (const std::exception&) {
    ThrowParse(path, line, "expected a number, got '" + token + "'");
  }
  if (consumed != token.size()) {
    ThrowParse(path, line, "trailing characters in number '" + token + "'");
  }
  return value;
}

int ParseInt(const std::string& path, int line, const std::string& token) {
  size_t consumed = 0;
  long value = 0;
  try {
    value = std::stol(token, &consumed);
  } catch (const std::exception&) {
    ThrowParse(path, line, "expected an integer, got '" + token + "'");
  }
  if (consumed != token.size()) {
    ThrowParse(path, line, "trailing characters in integer '" + token + "'");
  }
  return static_cast<int>(value);
}

std::string FormatDouble(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

// Per-pixel normal renormalization; zero-length entries become invalid.
void RenormalizeNormals(Raster* normals) {
  for (int v = 0; v < normals->height(); ++v) {
    for (int u = 0; u < normals->width(); ++u) {
      if (!normals->IsValid(u, v)) continue;
      const double nx = normals->at(u, v, 0);
      const double ny = normals->at(u, v, 1);
      const double nz = normals->at(u, v, 2);
      const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
      if (norm < 1e-12) {
        normals->SetInvalid(u, v);
        continue;
      }
      normals->at(u, v, 0) = static_cast<float>(nx / norm);
      normals->at(u, v, 1) = static_cast<float>(ny / norm);
      normals->at(u, v, 2) = static_cast<float>(nz / norm);
    }
  }
}

Raster LoadImageRaster(const std::string& dir, const std::string& relative,
                       int image_id, int width, int height, int channels,
                       const std::string& what) {
  const Raster raster = LoadRaster(dir + "/" + relative);
  if (raster.width() != width || raster.height() != height) {
    throw ValidationError(
        what + " raster of image " + std::to_string(image_id) + " is " +
        std::to_string(raster.width()) + "x" + std::to_string(raster.height()) +
        ", manifest says " + std::to_string(width) + "x" +
        std::to_string(height));
  }
  if (raster.channels() != channels) {
    throw ValidationError(what + " raster of image " +
                          std::to_string(image_id) + " has " +
                          std::to_string(raster.channels()) +
                          " channels, expected " + std::to_string(channels));
  }
  return raster;
}

}  // namespace

Raster LoadRaster(const std::string& path) {
  const std::string bytes = ReadFileBytes(path);
  if (bytes.size() < kRasterHeaderBytes) {
    throw ParseError(path + ": truncated header at byte " +
                     std::to_string(bytes.size()) + ", need " +
                     std::to_string(kRasterHeaderBytes));
  }
  if (std::memcmp(bytes.data(), kRasterMagic, 4) != 0) {
    throw ParseError(path + ": bad magic at byte 0, expected MPR1");
  }
  const uint32_t width = ReadU32(bytes.data() + 4);
  const uint32_t height = ReadU32(bytes.data() + 8);
  const uint32_t channels = ReadU32(bytes.data() + 12);
  const uint32_t reserved = ReadU32(bytes.data() + 16);
  if (reserved != 0) {
    throw ParseError(path + ": reserved field at byte 16 is " +
                     std::to_string(reserved) + ", expected 0");
  }
  if (width == 0 || height == 0 || channels == 0 || width > 1u << 20 ||
      height > 1u << 20 || channels > 16) {
    throw ParseError(path + ": implausible dimensions " +
                     std::to_string(width) + "x" + std::to_string(height) +
                     "x" + std::to_string(channels));
  }
  const size_t expected =
      static_cast<size_t>(width) * height * channels * sizeof(float);
  const size_t payload = bytes.size() - kRasterHeaderBytes;
  if (payload != expected) {
    throw ParseError(path + ": truncated raster payload at byte " +
                     std::to_string(bytes.size()) + ", expected " +
                     std::to_string(kRasterHeaderBytes + expected) +
                     " bytes total");
  }
  Raster raster(static_cast<int>(width), static_cast<int>(height),
                static_cast<int>(channels));
  std::memcpy(raster.data().data(), bytes.data() + kRasterHeaderBytes,
              expected);
  return raster;
}

void SaveRaster(const Raster& raster, const std::string& path) {
  std::string bytes;
  const size_t payload = raster.data().size() * sizeof(float);
  bytes.resize(kRasterHeaderBytes + payload);
  std::memcpy(bytes.data(), kRasterMagic, 4);
  const uint32_t header[4] = {static_cast<uint32_t>(raster.width()),
                              static_cast<uint32_t>(raster.height()),
                              static_cast<uint32_t>(raster.channels()), 0};
  std::memcpy(bytes.data() + 4, header, sizeof(header));
  std::memcpy(bytes.data() + kRasterHeaderBytes, raster.data().data(),
              payload);
  AtomicWriteBytes(path, bytes);
}

SceneInputs LoadScene(const std::string& dir,
                      const UncertaintyCalibrationOptions& calibration,
                      const NormalPropagationOptions& normal_propagation) {
  SceneInputs inputs;
  const std::string cameras_path = dir + "/cameras.txt";

  struct RasterPaths {
    std::string depth, normal, depth_sigma, normal_sigma;
  };
  std::map<int, RasterPaths> raster_paths;

  for (const TokenLine& row : TokenizeLines(ReadFileBytes(cameras_path))) {
    if (row.tokens.size() != 11) {
      ThrowParse(cameras_path, row.line,
                 "expected 11 fields (image_id fx fy cx cy width height "
                 "depth normal depth_sigma normal_sigma), got " +
                     std::to_string(row.tokens.size()));
    }
    const int image_id = ParseInt(cameras_path, row.line, row.tokens[0]);
    if (inputs.scene.images.count(image_id)) {
      throw ValidationError("duplicate image id " + std::to_string(image_id) +
                            " in cameras.txt");
    }
    ImageState image;
    image.intrinsics.fx = ParseDouble(cameras_path, row.line, row.tokens[1]);
    image.intrinsics.fy = ParseDouble(cameras_path, row.line, row.tokens[2]);
    image.intrinsics.cx = ParseDouble(cameras_path, row.line, row.tokens[3]);
    image.intrinsics.cy = ParseDouble(cameras_path, row.line, row.tokens[4]);
    image.intrinsics.width = ParseInt(cameras_path, row.line, row.tokens[5]);
    image.intrinsics.height = ParseInt(cameras_path, row.line, row.tokens[6]);
    if (image.intrinsics.fx <= 0 || image.intrinsics.fy <= 0 ||
        image.intrinsics.width <= 0 || image.intrinsics.height <= 0) {
      throw ValidationError("non-positive camera geometry for image " +
                            std::to_string(image_id));
    }
    raster_paths[image_id] = {row.tokens[7], row.tokens[8], row.tokens[9],
                              row.tokens[10]};
    inputs.scene.images.emplace(image_id, std::move(image));
  }

  for (auto& [image_id, image] : inputs.scene.images) {
    const std::string kp_path =
        dir + "/keypoints_" + std::to_string(image_id) + ".txt";
    std::vector<Keypoint> keypoints;
    std::vector<bool> seen;
    for (const TokenLine& row : TokenizeLines(ReadFileBytes(kp_path))) {
      if (row.tokens.size() != 4) {
        ThrowParse(kp_path, row.line,
                   "expected 4 fields (index u v sigma_px), got " +
                       std::to_string(row.tokens.size()));
      }
      const int index = ParseInt(kp_path, row.line, row.tokens[0]);
      if (index < 0) ThrowParse(kp_path, row.line, "negative keypoint index");
      Keypoint keypoint;
      keypoint.position.x() = ParseDouble(kp_path, row.line, row.tokens[1]);
      keypoint.position.y() = ParseDouble(kp_path, row.line, row.tokens[2]);
      keypoint.sigma_px = ParseDouble(kp_path, row.line, row.tokens[3]);
      if (!(keypoint.sigma_px > 0)) {
        ThrowParse(kp_path, row.line, "keypoint sigma must be positive");
      }
      if (index >= static_cast<int>(keypoints.size())) {
        keypoints.resize(index + 1);
        seen.resize(index + 1, false);
      }
      if (seen[index]) {
        throw ValidationError("duplicate keypoint index " +
                              std::to_string(index) + " in " + kp_path);
      }
      seen[index] = true;
      keypoints[index] = keypoint;
    }
    for (size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) {
        throw ValidationError("keypoint indices of image " +
                              std::to_string(image_id) +
                              " are not dense: missing " + std::to_string(i));
      }
    }
    image.keypoints = std::move(keypoints);

    const RasterPaths& paths = raster_paths.at(image_id);
    const int w = image.intrinsics.width;
    const int h = image.intrinsics.height;
    const Raster depth =
        LoadImageRaster(dir, paths.depth, image_id, w, h, 1, "depth");
    Raster normals =
        LoadImageRaster(dir, paths.normal, image_id, w, h, 3, "normal");
    const Raster depth_sigma = LoadImageRaster(dir, paths.depth_sigma,
                                               image_id, w, h, 1, "depth sigma");
    const Raster normal_sigma = LoadImageRaster(
        dir, paths.normal_sigma, image_id, w, h, 1, "normal sigma");

    RenormalizeNormals(&normals);
    image.prior_depth = depth;
    image.prior_sigma = CalibrateDepthUncertainty(depth, depth_sigma, calibration);
    image.normal_model = PropagateNormalUncertainty(
        normals, normal_sigma, image.intrinsics, nullptr, normal_propagation);
  }

  const std::string matches_path = dir + "/matches.txt";
  const std::vector<TokenLine> rows =
      TokenizeLines(ReadFileBytes(matches_path));
  size_t cursor = 0;
  while (cursor < rows.size()) {
    const TokenLine& header = rows[cursor];
    if (header.tokens[0] != "PAIR" || header.tokens.size() != 4) {
      ThrowParse(matches_path, header.line,
                 "expected 'PAIR a b n' block header");
    }
    PairMatches block;
    block.image_a = ParseInt(matches_path, header.line, header.tokens[1]);
    block.image_b = ParseInt(matches_path, header.line, header.tokens[2]);
    const int count = ParseInt(matches_path, header.line, header.tokens[3]);
    if (count < 0) ThrowParse(matches_path, header.line, "negative count");
    if (block.image_a == block.image_b) {
      throw ValidationError("matches.txt pairs image " +
                            std::to_string(block.image_a) + " with itself");
    }
    for (const int id : {block.image_a, block.image_b}) {
      if (!inputs.scene.images.count(id)) {
        throw ValidationError("matches.txt references image " +
                              std::to_string(id) + " absent from cameras.txt");
      }
    }
    if (cursor + 1 + count > rows.size()) {
      ThrowParse(matches_path, header.line,
                 "block promises " + std::to_string(count) +
                     " matches but the file ends early");
    }
    const size_t kp_a = inputs.scene.images.at(block.image_a).keypoints.size();
    const size_t kp_b = inputs.scene.images.at(block.image_b).keypoints.size();
    for (int k = 0; k < count; ++k) {
      const TokenLine& row = rows[cursor + 1 + k];
      if (row.tokens.size() != 3) {
        ThrowParse(matches_path, row.line,
                   "expected 3 fields (idx_a idx_b score)");
      }
      PairMatches::Entry entry;
      entry.idx_a = ParseInt(matches_path, row.line, row.tokens[0]);
      entry.idx_b = ParseInt(matches_path, row.line, row.tokens[1]);
      entry.score = ParseDouble(matches_path, row.line, row.tokens[2]);
      if (entry.idx_a < 0 || entry.idx_a >= static_cast<int>(kp_a) ||
          entry.idx_b < 0 || entry.idx_b >= static_cast<int>(kp_b)) {
        throw ValidationError(
            "match (" + std::to_string(entry.idx_a) + ", " +
            std::to_string(entry.idx_b) + ") out of keypoint range for pair " +
            std::to_string(block.image_a) + "-" + std::to_string(block.image_b));
      }
      if (!(entry.score > 0.0) || entry.score > 1.0) {
        throw ValidationError("match score " + std::to_string(entry.score) +
                              " outside (0, 1] in pair " +
                              std::to_string(block.image_a) + "-" +
                              std::to_string(block.image_b));
      }
      block.entries.push_back(entry);
    }
    cursor += 1 + count;
    inputs.matches.push_back(std::move(block));
  }

  return inputs;
}

void SavePoses(const Reconstruction& scene, const std::string& path,
               const std::string& status) {
  std::ostringstream out;
  out << "# status = " << status << "\n";
  out << "# image_id qw qx qy qz tx ty tz\n";
  for (const auto& [image_id, image] : scene.images) {
    if (!image.registered) continue;
    out << image_id << " " << FormatDouble(image.pose.q.w()) << " "
        << FormatDouble(image.pose.q.x()) << " "
        << FormatDouble(image.pose.q.y()) << " "
        << FormatDouble(image.pose.q.z()) << " "
        << FormatDouble(image.pose.t.x()) << " "
        << FormatDouble(image.pose.t.y()) << " "
        << FormatDouble(image.pose.t.z()) << "\n";
  }
  AtomicWriteBytes(path, out.str());
}

std::map<int, PoseSE3> LoadPoses(const std::string& path) {
  std::map<int, PoseSE3> poses;
  for (const TokenLine& row : TokenizeLines(ReadFileBytes(path))) {
    if (row.tokens.size() != 8) {
      ThrowParse(path, row.line,
                 "expected 8 fields (image_id qw qx qy qz tx ty tz)");
    }
    const int image_id = ParseInt(path, row.line, row.tokens[0]);
    if (poses.count(image_id)) {
      throw ValidationError("duplicate image id " + std::to_string(image_id) +
                            " in " + path);
    }
    // Assign the components directly: the constructor's renormalization
    // would perturb the bits and break the exact round trip.
    PoseSE3 pose;
    pose.q.w() = ParseDouble(path, row.line, row.tokens[1]);
    pose.q.x() = ParseDouble(path, row.line, row.tokens[2]);
    pose.q.y() = ParseDouble(path, row.line, row.tokens[3]);
    pose.q.z() = ParseDouble(path, row.line, row.tokens[4]);
    pose.t.x() = ParseDouble(path, row.line, row.tokens[5]);
    pose.t.y() = ParseDouble(path, row.line, row.tokens[6]);
    pose.t.z() = ParseDouble(path, row.line, row.tokens[7]);
    poses.emplace(image_id, pose);
  }
  return poses;
}

void SavePoints(const Reconstruction& scene, const std::string& path,
                const std::string& status) {
  std::ostringstream out;
  out << "# status = " << status << "\n";
  out << "# point_id x y z provenance track_length mean_reproj_err\n";
  for (size_t point_id = 0; point_id < scene.points().size(); ++point_id) {
    const ScenePoint& point = scene.points()[point_id];
    if (!point.alive) continue;
    double error_sum = 0.0;
    int error_count = 0;
    for (const Observation& obs : point.track) {
      const auto it = scene.images.find(obs.image_id);
      if (it == scene.images.end() || !it->second.registered) continue;
      const ImageState& image = it->second;
      try {
        const Eigen::Vector2d projected =
            Project(image.intrinsics, image.pose, point.position);
        error_sum +=
            (projected - image.keypoints[obs.keypoint_idx].position).norm();
        ++error_count;
      } catch (const CheiralityError&) {
        // Behind-camera observations carry no meaningful pixel error.
      }
    }
    out << point_id << " " << FormatDouble(point.position.x()) << " "
        << FormatDouble(point.position.y()) << " "
        << FormatDouble(point.position.z()) << " "
        << (point.provenance == PointProvenance::kLifted ? "lifted"
                                                         : "triangulated")
        << " " << point.track.size() << " "
        << FormatDouble(error_count > 0 ? error_sum / error_count : 0.0)
        << "\n";
  }
  AtomicWriteBytes(path, out.str());
}

void SaveReconstruction(const Reconstruction& scene,
                        const std::vector<std::string>& events,
                        const std::string& status, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir + ": cannot create directory: " + ec.message());

  SavePoses(scene, dir + "/poses.txt", status);
  SavePoints(scene, dir + "/points3D.txt", status);
  for (const auto& [image_id, image] : scene.images) {
    if (!image.registered || image.ActiveDepth().empty()) continue;
    SaveRaster(image.ActiveDepth(),
               dir + "/depth_refined_" + std::to_string(image_id) + ".mpr");
  }
  std::ostringstream log;
  for (const std::string& event : events) log << event << "\n";
  AtomicWriteBytes(dir + "/events.log", log.str());
}

}  // namespace priorsfm
