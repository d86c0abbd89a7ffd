#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ftop {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// One straight boundary edge between two listed vertices.
struct Segment {
    int id = 0;
    int start_vertex = 0;
    int end_vertex = 0;
};

struct BoundaryRep {
    std::vector<Vec2> vertices;
    std::vector<Segment> segments;  // ids unique, contiguous from 1, closed loop
    std::vector<Vec2> design_region;                 // polygon; empty means whole domain
    std::vector<std::vector<Vec2>> solid_regions;    // frozen-solid polygons (gamma = 1)
    Vec2 bbox_min, bbox_max;
};

BoundaryRep load_geometry(const std::string& path);
BoundaryRep parse_geometry(const std::string& json_text);

struct BoundaryEdge {
    int elem = 0;
    int local_edge = 0;  // 0 bottom, 1 right, 2 top, 3 left
    int segment_id = 0;
};

// Local corner pairs of each element edge, in CCW connectivity order.
inline constexpr int kEdgeNodes[4][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};

// Outward unit normal of each local edge on an axis-aligned element.
inline constexpr double kEdgeNormal[4][2] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};

// Structured voxel mesh over the rectangular outline. Elements and nodes are
// numbered row-major by (iy, ix); connectivity is counter-clockwise.
struct Mesh {
    int nx = 0, ny = 0;
    double hx = 0.0, hy = 0.0;
    Vec2 origin;
    std::vector<Vec2> node_coords;
    std::vector<std::array<int, 4>> elem_conn;
    std::vector<double> elem_volume;
    std::vector<BoundaryEdge> boundary_edges;
    std::vector<std::uint8_t> design_mask;  // designable elements
    std::vector<std::uint8_t> solid_mask;   // frozen-solid elements

    int n_nodes() const { return (nx + 1) * (ny + 1); }
    int n_elems() const { return nx * ny; }
    int node_id(int ix, int iy) const { return iy * (nx + 1) + ix; }
    int elem_id(int ix, int iy) const { return iy * nx + ix; }
    Vec2 elem_centroid(int e) const {
        const int ix = e % nx, iy = e / nx;
        return {origin.x + (ix + 0.5) * hx, origin.y + (iy + 0.5) * hy};
    }
    double domain_area() const { return nx * hx * ny * hy; }
};

Mesh build_mesh(const BoundaryRep& geom, int nx, int ny);

enum class FieldComp : int { ux = 0, uy = 1, p = 2, T = 3, dx = 4, dy = 5 };
inline constexpr int kNumFieldComps = 6;

struct BCEntry {
    int segment = 0;
    FieldComp comp = FieldComp::ux;
    enum class Profile { constant, parabolic } profile = Profile::constant;
    double value = 0.0;  // constant value, or peak for parabolic
};

struct NeumannEntry {
    int segment = 0;
    FieldComp comp = FieldComp::T;
    double value = 0.0;  // outward flux density
};

struct BCTable {
    std::vector<BCEntry> dirichlet;
    std::vector<NeumannEntry> neumann;
};

struct NodeBC {
    int node = 0;
    double value = 0.0;
    int segment = 0;  // winning segment id at junctions
};

// Resolved Dirichlet data, one sorted list per field component.
struct DofBC {
    std::array<std::vector<NodeBC>, kNumFieldComps> fixed;
};

DofBC apply_bcs(const Mesh& mesh, const BCTable& table);

// Signed even-odd point-in-polygon test used for design and solid regions.
bool point_in_polygon(const Vec2& pt, const std::vector<Vec2>& poly);

}  // namespace ftop
