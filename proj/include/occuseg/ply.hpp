#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "occuseg/geometry.hpp"

namespace occuseg {

/// Optional extra per-point integer columns carried alongside a PointCloud,
/// e.g. the supervoxel `segment` id debug dump.
struct PlyExtras {
    std::vector<int> segment;
};

struct PlyData {
    PointCloud cloud;
    PlyExtras extras;
};

/// Reads ASCII or binary_little_endian PLY with properties x,y,z, red,green,
/// blue, optional nx,ny,nz, optional integer `label` (semantic), `instance`
/// and `segment`. Throws ParseError with a line/byte offset on malformed input.
PlyData read_ply(const std::string& path);
PlyData read_ply(std::istream& in, const std::string& name = "<stream>");

enum class PlyFormat { Ascii, BinaryLittleEndian };

/// Writes the same schema. Only attribute arrays present in the cloud (and a
/// non-empty extras.segment) are emitted.
void write_ply(const std::string& path, const PointCloud& cloud,
               const PlyExtras& extras = {},
               PlyFormat format = PlyFormat::BinaryLittleEndian);
void write_ply(std::ostream& out, const PointCloud& cloud,
               const PlyExtras& extras = {},
               PlyFormat format = PlyFormat::BinaryLittleEndian);

/// Convenience: a voxel grid flattened to one point per cell.
PointCloud grid_to_cloud(const VoxelGrid& grid);

}  // namespace occuseg
