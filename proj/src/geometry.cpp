#include "ftop/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "ftop/errors.hpp"

namespace ftop {

namespace {

using nlohmann::json;

Vec2 parse_point(const json& j, const char* where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(std::string("geometry: ") + where + " entries must be [x, y] pairs");
    return {j[0].get<double>(), j[1].get<double>()};
}

double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = a.x + t * dx - p.x, py = a.y + t * dy - p.y;
    return std::sqrt(px * px + py * py);
}

}  // namespace

BoundaryRep parse_geometry(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("geometry: parse failure: ") + e.what());
    }
    if (!j.contains("vertices") || !j.contains("segments"))
        throw ConfigError("geometry: requires 'vertices' and 'segments' keys");

    BoundaryRep rep;
    for (const auto& v : j["vertices"]) rep.vertices.push_back(parse_point(v, "vertices"));

    const int nv = int(rep.vertices.size());
    int idx = 0;
    for (const auto& s : j["segments"]) {
        Segment seg;
        if (!s.contains("id") || !s.contains("start_vertex") || !s.contains("end_vertex"))
            throw ConfigError("geometry: segment index " + std::to_string(idx) +
                              " missing id/start_vertex/end_vertex");
        seg.id = s["id"].get<int>();
        seg.start_vertex = s["start_vertex"].get<int>();
        seg.end_vertex = s["end_vertex"].get<int>();
        if (seg.start_vertex < 0 || seg.start_vertex >= nv || seg.end_vertex < 0 ||
            seg.end_vertex >= nv)
            throw ConfigError("geometry: segment index " + std::to_string(idx) +
                              " references missing vertex");
        rep.segments.push_back(seg);
        ++idx;
    }
    if (rep.segments.empty()) throw ConfigError("geometry: no segments");

    // Ids must be unique and contiguous from 1.
    std::set<int> ids;
    for (std::size_t k = 0; k < rep.segments.size(); ++k) {
        const int id = rep.segments[k].id;
        if (!ids.insert(id).second)
            throw ConfigError("geometry: duplicate segment id " + std::to_string(id) +
                              " at segment index " + std::to_string(k));
    }
    const int n = int(rep.segments.size());
    for (int want = 1; want <= n; ++want)
        if (!ids.count(want))
            throw ConfigError("geometry: segment ids not contiguous from 1, missing id " +
                              std::to_string(want));

    // The loop must close when segments are walked in id order.
    std::vector<const Segment*> by_id(n);
    for (const auto& s : rep.segments) by_id[s.id - 1] = &s;
    for (int k = 0; k < n; ++k) {
        const Segment* cur = by_id[k];
        const Segment* nxt = by_id[(k + 1) % n];
        if (cur->end_vertex != nxt->start_vertex)
            throw ConfigError("geometry: open boundary loop after segment id " +
                              std::to_string(cur->id));
        const Vec2 a = rep.vertices[cur->start_vertex], b = rep.vertices[cur->end_vertex];
        if (a.x == b.x && a.y == b.y)
            throw ConfigError("geometry: zero-length segment id " + std::to_string(cur->id));
    }

    rep.bbox_min = rep.bbox_max = rep.vertices[rep.segments[0].start_vertex];
    for (const auto& s : rep.segments) {
        for (int vi : {s.start_vertex, s.end_vertex}) {
            const Vec2& v = rep.vertices[vi];
            rep.bbox_min.x = std::min(rep.bbox_min.x, v.x);
            rep.bbox_min.y = std::min(rep.bbox_min.y, v.y);
            rep.bbox_max.x = std::max(rep.bbox_max.x, v.x);
            rep.bbox_max.y = std::max(rep.bbox_max.y, v.y);
        }
    }

    if (j.contains("design_region"))
        for (const auto& v : j["design_region"])
            rep.design_region.push_back(parse_point(v, "design_region"));
    if (j.contains("solid_regions"))
        for (const auto& poly : j["solid_regions"]) {
            std::vector<Vec2> pts;
            for (const auto& v : poly) pts.push_back(parse_point(v, "solid_regions"));
            rep.solid_regions.push_back(std::move(pts));
        }
    return rep;
}

BoundaryRep load_geometry(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("geometry: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_geometry(ss.str());
}

bool point_in_polygon(const Vec2& pt, const std::vector<Vec2>& poly) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y > pt.y) != (b.y > pt.y)) {
            const double x_cross = a.x + (pt.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (pt.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

Mesh build_mesh(const BoundaryRep& geom, int nx, int ny) {
    if (nx < 2 || ny < 2) throw ConfigError("mesh: nx and ny must be at least 2");

    const Vec2 lo = geom.bbox_min, hi = geom.bbox_max;
    const double w = hi.x - lo.x, h = hi.y - lo.y;
    if (w <= 0.0 || h <= 0.0) throw ConfigError("mesh: degenerate bounding box");
    const double tol_rect = 1e-12 * std::max(w, h);
    for (const auto& s : geom.segments) {
        for (int vi : {s.start_vertex, s.end_vertex}) {
            const Vec2& v = geom.vertices[vi];
            const bool on_x = std::fabs(v.x - lo.x) <= tol_rect || std::fabs(v.x - hi.x) <= tol_rect;
            const bool on_y = std::fabs(v.y - lo.y) <= tol_rect || std::fabs(v.y - hi.y) <= tol_rect;
            if (!on_x && !on_y)
                throw ConfigError("mesh: non-rectangular outline, segment id " +
                                  std::to_string(s.id) + " leaves the bounding rectangle");
        }
        const Vec2& a = geom.vertices[s.start_vertex];
        const Vec2& b = geom.vertices[s.end_vertex];
        if (std::fabs(a.x - b.x) > tol_rect && std::fabs(a.y - b.y) > tol_rect)
            throw ConfigError("mesh: non-rectangular outline, segment id " + std::to_string(s.id) +
                              " is not axis-aligned");
    }

    Mesh mesh;
    mesh.nx = nx;
    mesh.ny = ny;
    mesh.hx = w / nx;
    mesh.hy = h / ny;
    mesh.origin = lo;

    mesh.node_coords.resize(std::size_t(mesh.n_nodes()));
    for (int iy = 0; iy <= ny; ++iy)
        for (int ix = 0; ix <= nx; ++ix)
            mesh.node_coords[mesh.node_id(ix, iy)] = {lo.x + ix * mesh.hx, lo.y + iy * mesh.hy};

    mesh.elem_conn.resize(std::size_t(mesh.n_elems()));
    mesh.elem_volume.assign(std::size_t(mesh.n_elems()), mesh.hx * mesh.hy);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix)
            mesh.elem_conn[mesh.elem_id(ix, iy)] = {mesh.node_id(ix, iy), mesh.node_id(ix + 1, iy),
                                                    mesh.node_id(ix + 1, iy + 1),
                                                    mesh.node_id(ix, iy + 1)};

    // Tag every exterior edge with the segment whose line contains its midpoint.
    const double tol = mesh.hx / 100.0;
    auto tag_edge = [&](int elem, int local, Vec2 mid) {
        int best = -1;
        for (const auto& s : geom.segments) {
            const double d =
                dist_point_segment(mid, geom.vertices[s.start_vertex], geom.vertices[s.end_vertex]);
            if (d <= tol && (best < 0 || s.id < best)) best = s.id;
        }
        if (best < 0) {
            std::ostringstream os;
            os << "mesh: segment gap leaves untagged boundary edge at (" << mid.x << ", " << mid.y
               << ")";
            throw ConfigError(os.str());
        }
        mesh.boundary_edges.push_back({elem, local, best});
    };
    for (int ix = 0; ix < nx; ++ix) {
        tag_edge(mesh.elem_id(ix, 0), 0, {lo.x + (ix + 0.5) * mesh.hx, lo.y});
        tag_edge(mesh.elem_id(ix, ny - 1), 2, {lo.x + (ix + 0.5) * mesh.hx, hi.y});
    }
    for (int iy = 0; iy < ny; ++iy) {
        tag_edge(mesh.elem_id(nx - 1, iy), 1, {hi.x, lo.y + (iy + 0.5) * mesh.hy});
        tag_edge(mesh.elem_id(0, iy), 3, {lo.x, lo.y + (iy + 0.5) * mesh.hy});
    }

    mesh.design_mask.assign(std::size_t(mesh.n_elems()), 1);
    mesh.solid_mask.assign(std::size_t(mesh.n_elems()), 0);
    for (int e = 0; e < mesh.n_elems(); ++e) {
        const Vec2 c = mesh.elem_centroid(e);
        if (!geom.design_region.empty() && !point_in_polygon(c, geom.design_region))
            mesh.design_mask[e] = 0;
        for (const auto& poly : geom.solid_regions)
            if (point_in_polygon(c, poly)) {
                mesh.solid_mask[e] = 1;
                mesh.design_mask[e] = 0;
            }
    }
    return mesh;
}

DofBC apply_bcs(const Mesh& mesh, const BCTable& table) {
    // Nodes touched by each tagged segment.
    std::map<int, std::set<int>> seg_nodes;
    for (const auto& be : mesh.boundary_edges) {
        const auto& conn = mesh.elem_conn[be.elem];
        seg_nodes[be.segment_id].insert(conn[kEdgeNodes[be.local_edge][0]]);
        seg_nodes[be.segment_id].insert(conn[kEdgeNodes[be.local_edge][1]]);
    }

    auto require_segment = [&](int id) {
        if (!seg_nodes.count(id))
            throw ConfigError("bc: unknown segment id " + std::to_string(id));
    };
    for (const auto& e : table.neumann) require_segment(e.segment);

    // Winner per (component, node): the lowest segment id.
    std::array<std::map<int, NodeBC>, kNumFieldComps> fixed;
    for (const auto& entry : table.dirichlet) {
        require_segment(entry.segment);
        const auto& nodes = seg_nodes[entry.segment];

        // Extent of the tagged span; segments are axis-aligned so one axis varies.
        double smin = 0.0, smax = 0.0;
        bool along_x = false;
        {
            double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
            bool first = true;
            for (int nid : nodes) {
                const Vec2& c = mesh.node_coords[nid];
                if (first) {
                    xmin = xmax = c.x;
                    ymin = ymax = c.y;
                    first = false;
                } else {
                    xmin = std::min(xmin, c.x);
                    xmax = std::max(xmax, c.x);
                    ymin = std::min(ymin, c.y);
                    ymax = std::max(ymax, c.y);
                }
            }
            along_x = (xmax - xmin) >= (ymax - ymin);
            smin = along_x ? xmin : ymin;
            smax = along_x ? xmax : ymax;
        }
        const double mid = 0.5 * (smin + smax);
        const double r = 0.5 * (smax - smin);

        for (int nid : nodes) {
            double value = entry.value;
            if (entry.profile == BCEntry::Profile::parabolic) {
                const Vec2& c = mesh.node_coords[nid];
                const double s = (along_x ? c.x : c.y) - mid;
                value = r > 0.0 ? entry.value * (1.0 - (s / r) * (s / r)) : entry.value;
            }
            auto& slot = fixed[int(entry.comp)];
            auto it = slot.find(nid);
            if (it == slot.end() || entry.segment < it->second.segment)
                slot[nid] = {nid, value, entry.segment};
        }
    }

    DofBC out;
    for (int c = 0; c < kNumFieldComps; ++c) {
        out.fixed[c].reserve(fixed[c].size());
        for (const auto& [nid, bc] : fixed[c]) out.fixed[c].push_back(bc);
    }
    return out;
}

}  // namespace ftop
