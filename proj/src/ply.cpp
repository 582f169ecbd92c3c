#include "occuseg/ply.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace occuseg {

namespace {

enum class PType { Float32, Float64, Uint8, Int8, Uint16, Int16, Uint32, Int32 };

std::size_t psize(PType t) {
    switch (t) {
        case PType::Float32: return 4;
        case PType::Float64: return 8;
        case PType::Uint8: case PType::Int8: return 1;
        case PType::Uint16: case PType::Int16: return 2;
        default: return 4;
    }
}

PType parse_type(const std::string& s, const std::string& where) {
    if (s == "float" || s == "float32") return PType::Float32;
    if (s == "double" || s == "float64") return PType::Float64;
    if (s == "uchar" || s == "uint8") return PType::Uint8;
    if (s == "char" || s == "int8") return PType::Int8;
    if (s == "ushort" || s == "uint16") return PType::Uint16;
    if (s == "short" || s == "int16") return PType::Int16;
    if (s == "uint" || s == "uint32") return PType::Uint32;
    if (s == "int" || s == "int32") return PType::Int32;
    throw ParseError("ply: unsupported property type '" + s + "' at " + where);
}

struct Property {
    std::string name;
    PType type;
};

double read_binary_value(std::istream& in, PType t, const std::string& name,
                         std::size_t offset) {
    char buf[8];
    in.read(buf, std::streamsize(psize(t)));
    if (!in)
        throw ParseError("ply " + name + ": truncated binary data at byte offset " +
                         std::to_string(offset));
    switch (t) {
        case PType::Float32: { float v; std::memcpy(&v, buf, 4); return v; }
        case PType::Float64: { double v; std::memcpy(&v, buf, 8); return v; }
        case PType::Uint8: { std::uint8_t v; std::memcpy(&v, buf, 1); return v; }
        case PType::Int8: { std::int8_t v; std::memcpy(&v, buf, 1); return v; }
        case PType::Uint16: { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
        case PType::Int16: { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
        case PType::Uint32: { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
        default: { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
    }
}

}  // namespace

PlyData read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("ply: cannot open '" + path + "'");
    return read_ply(in, path);
}

PlyData read_ply(std::istream& in, const std::string& name) {
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::string& {
        if (!std::getline(in, line))
            throw ParseError("ply " + name + ": unexpected end of header at line " +
                             std::to_string(line_no));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        return line;
    };

    if (next_line() != "ply")
        throw ParseError("ply " + name + ": missing magic at line 1");

    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<Property> props;
    bool in_vertex_element = false;
    bool saw_other_element = false;

    while (true) {
        std::istringstream ls(next_line());
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") binary = false;
            else if (fmt == "binary_little_endian") binary = true;
            else throw ParseError("ply " + name + ": unsupported format '" + fmt +
                                  "' at line " + std::to_string(line_no));
        } else if (tok == "element") {
            std::string ename;
            std::size_t count;
            ls >> ename >> count;
            if (ename == "vertex") {
                vertex_count = count;
                in_vertex_element = true;
            } else {
                if (count > 0)
                    throw ParseError("ply " + name + ": unsupported element '" + ename +
                                     "' at line " + std::to_string(line_no));
                in_vertex_element = false;
                saw_other_element = true;
            }
        } else if (tok == "property") {
            std::string type;
            ls >> type;
            if (type == "list")
                throw ParseError("ply " + name + ": list properties unsupported at line " +
                                 std::to_string(line_no));
            std::string pname;
            ls >> pname;
            if (in_vertex_element)
                props.push_back({pname, parse_type(type, "line " + std::to_string(line_no))});
        } else if (tok == "end_header") {
            break;
        } else {
            throw ParseError("ply " + name + ": unknown header token '" + tok +
                             "' at line " + std::to_string(line_no));
        }
    }
    (void)saw_other_element;

    auto index_of = [&](const char* pname) -> int {
        for (std::size_t i = 0; i < props.size(); ++i)
            if (props[i].name == pname) return int(i);
        return -1;
    };
    const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
    if (ix < 0 || iy < 0 || iz < 0)
        throw ParseError("ply " + name + ": vertex element lacks x/y/z");
    const int ir = index_of("red"), ig = index_of("green"), ib = index_of("blue");
    const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
    const int ilabel = index_of("label");
    const int iinst = index_of("instance");
    const int iseg = index_of("segment");
    const bool has_color = ir >= 0 && ig >= 0 && ib >= 0;
    const bool has_normal = inx >= 0 && iny >= 0 && inz >= 0;

    PlyData out;
    out.cloud.points.reserve(vertex_count);
    std::vector<double> row(props.size());

    std::size_t byte_offset = 0;
    for (std::size_t v = 0; v < vertex_count; ++v) {
        if (binary) {
            for (std::size_t p = 0; p < props.size(); ++p) {
                row[p] = read_binary_value(in, props[p].type, name, byte_offset);
                byte_offset += psize(props[p].type);
            }
        } else {
            std::istringstream ls(next_line());
            for (std::size_t p = 0; p < props.size(); ++p) {
                if (!(ls >> row[p]))
                    throw ParseError("ply " + name + ": malformed vertex at line " +
                                     std::to_string(line_no));
            }
        }
        out.cloud.points.emplace_back(row[ix], row[iy], row[iz]);
        if (has_color) {
            double scale = props[ir].type == PType::Uint8 ? 1.0 / 255.0 : 1.0;
            out.cloud.colors.emplace_back(row[ir] * scale, row[ig] * scale, row[ib] * scale);
        }
        if (has_normal)
            out.cloud.normals.emplace_back(row[inx], row[iny], row[inz]);
        if (ilabel >= 0) out.cloud.semantic_labels.push_back(int(row[ilabel]));
        if (iinst >= 0) out.cloud.instance_labels.push_back(int(row[iinst]));
        if (iseg >= 0) out.extras.segment.push_back(int(row[iseg]));
    }
    return out;
}

void write_ply(const std::string& path, const PointCloud& cloud,
               const PlyExtras& extras, PlyFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("ply: cannot open '" + path + "' for writing");
    write_ply(out, cloud, extras, format);
}

void write_ply(std::ostream& out, const PointCloud& cloud,
               const PlyExtras& extras, PlyFormat format) {
    const bool binary = format == PlyFormat::BinaryLittleEndian;
    const bool color = !cloud.colors.empty();
    const bool normal = !cloud.normals.empty();
    const bool label = !cloud.semantic_labels.empty();
    const bool inst = !cloud.instance_labels.empty();
    const bool seg = !extras.segment.empty();

    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii")
        << " 1.0\nelement vertex " << cloud.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n";
    if (color)
        out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
    if (normal)
        out << "property float nx\nproperty float ny\nproperty float nz\n";
    if (label) out << "property int label\n";
    if (inst) out << "property int instance\n";
    if (seg) out << "property int segment\n";
    out << "end_header\n";

    auto wf = [&](double v) {
        float f = float(v);
        out.write(reinterpret_cast<const char*>(&f), 4);
    };
    auto wi = [&](int v) {
        std::int32_t i = v;
        out.write(reinterpret_cast<const char*>(&i), 4);
    };
    auto wu8 = [&](double v01) {
        std::uint8_t b = std::uint8_t(std::clamp(std::lround(v01 * 255.0), 0l, 255l));
        out.write(reinterpret_cast<const char*>(&b), 1);
    };

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (binary) {
            wf(cloud.points[i].x); wf(cloud.points[i].y); wf(cloud.points[i].z);
            if (color) { wu8(cloud.colors[i].x); wu8(cloud.colors[i].y); wu8(cloud.colors[i].z); }
            if (normal) { wf(cloud.normals[i].x); wf(cloud.normals[i].y); wf(cloud.normals[i].z); }
            if (label) wi(cloud.semantic_labels[i]);
            if (inst) wi(cloud.instance_labels[i]);
            if (seg) wi(extras.segment[i]);
        } else {
            out << float(cloud.points[i].x) << ' ' << float(cloud.points[i].y) << ' '
                << float(cloud.points[i].z);
            if (color)
                out << ' ' << int(std::clamp(std::lround(cloud.colors[i].x * 255.0), 0l, 255l))
                    << ' ' << int(std::clamp(std::lround(cloud.colors[i].y * 255.0), 0l, 255l))
                    << ' ' << int(std::clamp(std::lround(cloud.colors[i].z * 255.0), 0l, 255l));
            if (normal)
                out << ' ' << float(cloud.normals[i].x) << ' ' << float(cloud.normals[i].y)
                    << ' ' << float(cloud.normals[i].z);
            if (label) out << ' ' << cloud.semantic_labels[i];
            if (inst) out << ' ' << cloud.instance_labels[i];
            if (seg) out << ' ' << extras.segment[i];
            out << '\n';
        }
    }
}

PointCloud grid_to_cloud(const VoxelGrid& grid) {
    PointCloud cloud;
    cloud.points.reserve(grid.size());
    bool any_semantic = false, any_instance = false;
    for (const auto& [c, cell] : grid.cells) {
        any_semantic |= cell.semantic_label != kUnlabeled;
        any_instance |= cell.instance_label != kUnlabeled;
    }
    for (const auto& [c, cell] : grid.cells) {
        cloud.points.push_back(cell.centroid);
        cloud.colors.push_back(cell.color);
        if (cell.normal.norm2() > 0.0) cloud.normals.push_back(cell.normal);
        if (any_semantic) cloud.semantic_labels.push_back(cell.semantic_label);
        if (any_instance) cloud.instance_labels.push_back(cell.instance_label);
    }
    if (cloud.normals.size() != cloud.points.size()) cloud.normals.clear();
    return cloud;
}

}  // namespace occuseg
