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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "scansim/geometry.hpp"

namespace scansim {

/// 3D ultrasound intensity grid, x-fastest, with an optional binary vessel
/// mask sharing the same geometry. Immutable once constructed.
class UsVolume {
 public:
  using Dims = std::array<int, 3>;

  UsVolume(Dims dims, Vec3 spacing_mm, Vec3 origin_mm, std::vector<std::uint8_t> voxels,
           std::optional<std::vector<std::uint8_t>> mask = std::nullopt);

  [[nodiscard]] const Dims& dims() const noexcept { return dims_; }
  [[nodiscard]] const Vec3& spacing() const noexcept { return spacing_; }
  [[nodiscard]] const Vec3& origin() const noexcept { return origin_; }
  [[nodiscard]] std::size_t voxel_count() const noexcept { return voxels_.size(); }
  [[nodiscard]] std::span<const std::uint8_t> voxels() const noexcept { return voxels_; }
  [[nodiscard]] bool has_mask() const noexcept { return mask_.has_value(); }
  /// Throws NoMask when the volume carries no mask channel.
  [[nodiscard]] std::span<const std::uint8_t> mask() const;

  [[nodiscard]] std::size_t linear_index(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
  }
  [[nodiscard]] std::uint8_t at(int i, int j, int k) const noexcept {
    return voxels_[linear_index(i, j, k)];
  }

  /// Continuous voxel coordinates of a world point (voxel centers at integers).
  [[nodiscard]] Vec3 world_to_index(const Vec3& world_mm) const {
    return (world_mm - origin_).cwiseQuotient(spacing_);
  }
  [[nodiscard]] Vec3 bounds_min() const { return origin_; }
  [[nodiscard]] Vec3 bounds_max() const;

 private:
  Dims dims_;
  Vec3 spacing_;
  Vec3 origin_;
  std::vector<std::uint8_t> voxels_;
  std::optional<std::vector<std::uint8_t>> mask_;
};

struct SliceSpec {
  int width_px = 224;
  int height_px = 224;
  double pixel_spacing_mm = 0.2;

  void validate() const;
};

struct SliceImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  SliceImage() = default;
  SliceImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  [[nodiscard]] std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const SliceImage&) const = default;
};

struct PixelCentroid {
  double row = 0.0;
  double col = 0.0;
};

/// .usvol reader/writer. See README for the layout.
UsVolume load_volume(const std::filesystem::path& path);
void write_volume(const UsVolume& volume, const std::filesystem::path& path);

/// World point of pixel (row, col). The probe position maps to the
/// top-center pixel (row 0, col (W-1)/2).
Vec3 pixel_to_world(const ProbePose& pose, const SliceSpec& spec, double row, double col);

/// Trilinear sample at continuous voxel coordinates; 0 outside [0, n-1].
double trilinear_at_index(const UsVolume& volume, const Vec3& index);

/// Oblique B-mode slice for the given pose. Interpolated values are
/// rounded half-up; out-of-volume samples are 0.
SliceImage sample_slice(const UsVolume& volume, const ProbePose& pose, const SliceSpec& spec);

/// Binary (0/1) in-plane mask using nearest-voxel lookup. Throws NoMask.
SliceImage sample_mask_slice(const UsVolume& volume, const ProbePose& pose, const SliceSpec& spec);

/// Mean (row, col) of in-plane mask pixels; nullopt if the plane misses the
/// vessel. Throws NoMask.
std::optional<PixelCentroid> mask_centroid_in_plane(const UsVolume& volume, const ProbePose& pose,
                                                    const SliceSpec& spec);

/// Fraction of image columns containing at least one mask pixel.
double mask_column_coverage(const UsVolume& volume, const ProbePose& pose, const SliceSpec& spec);

/// Whether a world point lies inside the volume bounding box grown by margin_mm.
bool inside_bounds(const UsVolume& volume, const Vec3& world_mm, double margin_mm);

}  // namespace scansim
