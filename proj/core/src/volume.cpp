/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 scansim contributors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "scansim/volume.hpp"

#include <cmath>
#include <fstream>

#include "json_io.hpp"
#include "scansim/error.hpp"

namespace scansim {

namespace {

constexpr int kVolumeFormatVersion = 1;

std::size_t product(const UsVolume::Dims& d) {
  return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) *
         static_cast<std::size_t>(d[2]);
}

std::uint8_t round_half_up_u8(double v) {
  const double r = std::floor(v + 0.5);
  if (!(r > 0.0)) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

}  // namespace

UsVolume::UsVolume(Dims dims, Vec3 spacing_mm, Vec3 origin_mm, std::vector<std::uint8_t> voxels,
                   std::optional<std::vector<std::uint8_t>> mask)
    : dims_(dims),
      spacing_(std::move(spacing_mm)),
      origin_(std::move(origin_mm)),
      voxels_(std::move(voxels)),
      mask_(std::move(mask)) {
  for (int d : dims_) {
    if (d < 2) throw Error(ErrorCode::MalformedHeader, "volume dims must be >= 2 on every axis");
  }
  if (!(spacing_.array() > 0.0).all() || !spacing_.allFinite()) {
    throw Error(ErrorCode::MalformedHeader, "volume spacing must be positive");
  }
  if (!origin_.allFinite()) throw Error(ErrorCode::MalformedHeader, "volume origin not finite");
  if (voxels_.size() != product(dims_)) {
    throw Error(ErrorCode::MalformedHeader, "voxel count does not match dims");
  }
  if (mask_) {
    if (mask_->size() != voxels_.size()) {
      throw Error(ErrorCode::MalformedHeader, "mask size does not match dims");
    }
    for (auto m : *mask_) {
      if (m > 1) throw Error(ErrorCode::MalformedHeader, "mask bytes must be 0 or 1");
    }
  }
}

std::span<const std::uint8_t> UsVolume::mask() const {
  if (!mask_) throw Error(ErrorCode::NoMask, "volume has no vessel mask");
  return *mask_;
}

Vec3 UsVolume::bounds_max() const {
  return origin_ + Vec3((dims_[0] - 1) * spacing_.x(), (dims_[1] - 1) * spacing_.y(),
                        (dims_[2] - 1) * spacing_.z());
}

void SliceSpec::validate() const {
  if (width_px <= 0 || height_px <= 0) {
    throw Error(ErrorCode::InvalidArgument, "slice size must be positive");
  }
  if (!(pixel_spacing_mm > 0.0) || !std::isfinite(pixel_spacing_mm)) {
    throw Error(ErrorCode::InvalidArgument, "pixel spacing must be positive");
  }
}

UsVolume load_volume(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::MissingFile, "volume file not found: " + path.string());
  }
  auto file = detail::read_headered_file(path);
  const auto& h = file.header;
  UsVolume::Dims dims{};
  Vec3 spacing, origin;
  bool has_mask = false;
  try {
    if (!h.contains("version") || h.at("version").get<int>() != kVolumeFormatVersion) {
      throw Error(ErrorCode::UnsupportedVersion,
                  path.string() + ": unsupported volume version " +
                      (h.contains("version") ? h.at("version").dump() : std::string("<none>")));
    }
    const auto& jd = h.at("dims");
    if (!jd.is_array() || jd.size() != 3) {
      throw Error(ErrorCode::MalformedHeader, "dims must have 3 entries");
    }
    for (int a = 0; a < 3; ++a) dims[a] = jd[a].get<int>();
    spacing = detail::vec3_from_json(h.at("spacing_mm"));
    origin = detail::vec3_from_json(h.at("origin_mm"));
    has_mask = h.at("has_mask").get<bool>();
  } catch (const detail::Json::exception& e) {
    throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UnsupportedVersion) throw;
    throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
  }
  for (int d : dims) {
    if (d < 2) throw Error(ErrorCode::MalformedHeader, path.string() + ": dims must be >= 2");
  }
  const std::size_t n = product(dims);
  const std::size_t expected = has_mask ? 2 * n : n;
  if (file.payload.size() != expected) {
    throw Error(ErrorCode::MalformedHeader,
                path.string() + ": header declares " + std::to_string(expected) +
                    " payload bytes, file has " + std::to_string(file.payload.size()));
  }
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(file.payload.data());
  std::vector<std::uint8_t> voxels(bytes, bytes + n);
  std::optional<std::vector<std::uint8_t>> mask;
  if (has_mask) mask.emplace(bytes + n, bytes + 2 * n);
  return UsVolume(dims, spacing, origin, std::move(voxels), std::move(mask));
}

void write_volume(const UsVolume& volume, const std::filesystem::path& path) {
  detail::Json header{{"version", kVolumeFormatVersion},
                      {"dims", {volume.dims()[0], volume.dims()[1], volume.dims()[2]}},
                      {"spacing_mm", detail::vec3_to_json(volume.spacing())},
                      {"origin_mm", detail::vec3_to_json(volume.origin())},
                      {"has_mask", volume.has_mask()}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  const auto vox = volume.voxels();
  out.write(reinterpret_cast<const char*>(vox.data()), static_cast<std::streamsize>(vox.size()));
  if (volume.has_mask()) {
    const auto m = volume.mask();
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size()));
  }
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

Vec3 pixel_to_world(const ProbePose& pose, const SliceSpec& spec, double row, double col) {
  const double u = (col - (spec.width_px - 1) / 2.0) * spec.pixel_spacing_mm;
  const double v = row * spec.pixel_spacing_mm;
  return pose.position + pose.orientation * Vec3(u, v, 0.0);
}

double trilinear_at_index(const UsVolume& volume, const Vec3& index) {
  const auto& d = volume.dims();
  // Round-off from world/index conversion should not drop boundary samples.
  constexpr double kEdge = 1e-9;
  const auto snap = [](double t, int n) {
    if (t < 0.0 && t > -kEdge) return 0.0;
    if (t > n - 1 && t < n - 1 + kEdge) return static_cast<double>(n - 1);
    return t;
  };
  const double x = snap(index.x(), d[0]);
  const double y = snap(index.y(), d[1]);
  const double z = snap(index.z(), d[2]);
  // Written as negated comparisons so NaN coordinates fall outside.
  if (!(x >= 0.0 && x <= d[0] - 1 && y >= 0.0 && y <= d[1] - 1 && z >= 0.0 && z <= d[2] - 1)) {
    return 0.0;
  }
  const int i0 = std::min(static_cast<int>(x), d[0] - 2);
  const int j0 = std::min(static_cast<int>(y), d[1] - 2);
  const int k0 = std::min(static_cast<int>(z), d[2] - 2);
  const double fx = x - i0;
  const double fy = y - j0;
  const double fz = z - k0;

  const double c00 = volume.at(i0, j0, k0) * (1 - fx) + volume.at(i0 + 1, j0, k0) * fx;
  const double c10 = volume.at(i0, j0 + 1, k0) * (1 - fx) + volume.at(i0 + 1, j0 + 1, k0) * fx;
  const double c01 = volume.at(i0, j0, k0 + 1) * (1 - fx) + volume.at(i0 + 1, j0, k0 + 1) * fx;
  const double c11 =
      volume.at(i0, j0 + 1, k0 + 1) * (1 - fx) + volume.at(i0 + 1, j0 + 1, k0 + 1) * fx;
  const double c0 = c00 * (1 - fy) + c10 * fy;
  const double c1 = c01 * (1 - fy) + c11 * fy;
  return c0 * (1 - fz) + c1 * fz;
}

SliceImage sample_slice(const UsVolume& volume, const ProbePose& pose, const SliceSpec& spec) {
  spec.validate();
  validate_pose(pose);
  SliceImage img(spec.width_px, spec.height_px);
  for (int r = 0; r < spec.height_px; ++r) {
    for (int c = 0; c < spec.width_px; ++c) {
      const Vec3 world = pixel_to_world(pose, spec, r, c);
      img.at(r, c) = round_half_up_u8(trilinear_at_index(volume, volume.world_to_index(world)));
    }
  }
  return img;
}

SliceImage sample_mask_slice(const UsVolume& volume, const ProbePose& pose, const SliceSpec& spec) {
  spec.validate();
  validate_pose(pose);
  const auto mask = volume.mask();
  const auto& d = volume.dims();
  SliceImage img(spec.width_px, spec.height_px);
  for (int r = 0; r < spec.height_px; ++r) {
    for (int c = 0; c < spec.width_px; ++c) {
      const Vec3 idx = volume.world_to_index(pixel_to_world(pose, spec, r, c));
      const double fi = std::floor(idx.x() + 0.5);
      const double fj = std::floor(idx.y() + 0.5);
      const double fk = std::floor(idx.z() + 0.5);
      if (!(fi >= 0 && fi < d[0] && fj >= 0 && fj < d[1] && fk >= 0 && fk < d[2])) continue;
      img.at(r, c) =
          mask[volume.linear_index(static_cast<int>(fi), static_cast<int>(fj), static_cast<int>(fk))];
    }
  }
  return img;
}

std::optional<PixelCentroid> mask_centroid_in_plane(const UsVolume& volume, const ProbePose& pose,
                                                    const SliceSpec& spec) {
  const SliceImage m = sample_mask_slice(volume, pose, spec);
  double sum_r = 0.0;
  double sum_c = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (m.at(r, c) != 0) {
        sum_r += r;
        sum_c += c;
        ++count;
      }
    }
  }
  if (count == 0) return std::nullopt;
  return PixelCentroid{sum_r / static_cast<double>(count), sum_c / static_cast<double>(count)};
}

double mask_column_coverage(const UsVolume& volume, const ProbePose& pose, const SliceSpec& spec) {
  const SliceImage m = sample_mask_slice(volume, pose, spec);
  int covered = 0;
  for (int c = 0; c < m.width; ++c) {
    for (int r = 0; r < m.height; ++r) {
      if (m.at(r, c) != 0) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / m.width;
}

bool inside_bounds(const UsVolume& volume, const Vec3& world_mm, double margin_mm) {
  const Vec3 lo = volume.bounds_min().array() - margin_mm;
  const Vec3 hi = volume.bounds_max().array() + margin_mm;
  return (world_mm.array() >= lo.array()).all() && (world_mm.array() <= hi.array()).all();
}

}  // namespace scansim
