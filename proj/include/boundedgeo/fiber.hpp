#pragma once

#include <algorithm>
#include <ostream>

#include "csv.hpp"
#include "eikonal.hpp"
#include "geodesic.hpp"
#include "parallel.hpp"

namespace boundedgeo {

template <int M>
struct FiberData {
    Face which = Face::bottom;
    Vec<M - 1> x;
    double dt = 0.0;
    double tol = 0.0;                              // |d - t| tolerance, 2h + 1e-6
    std::vector<DistortionSample<M>> samples;      // t, exp^perp(x, t), v(x, t)
    std::vector<char> minimizing;                  // 0 past L(x): M_S side
    double L = 0.0;
    bool cut_found = false;       // minimality lost inside the slab
    bool exited = false;          // fiber left through the boundary
    bool truncated_at_exit = false;  // exit reached before minimality was lost
    std::size_t cut_index = 0;    // sample holding L(x)

    Vec<M> cut_point() const { return samples[cut_index].point; }
};

inline double cut_tolerance(double h) { return 2.0 * h + 1e-6; }

// L(x): the last sampled t before |d(exp^perp(x, t)) - t| first exceeds
// tol = 2h + 1e-6. dt defaults to h / 4, the differencing step of v to
// max(1e-4, h / 10).
template <int M>
FiberData<M> cut_function(const DomainSpec<M>& d, const Vec<M - 1>& x, Face which, const DistanceField<M>& field,
                          double dt = 0.0, double fd_step = 0.0) {
    const bool is_source = which == Face::bottom ? field.source_bottom : field.source_top;
    if (!is_source)
        throw ArgumentError(std::string("cut_function: face '") + face_name(which) +
                            "' is not a source of the distance field");
    const double h = field.h;
    if (dt <= 0) dt = h / 4;
    if (fd_step <= 0) fd_step = std::max(1e-4, h / 10);
    double dmax = 0.0;
    for (double v : field.d)
        if (std::isfinite(v)) dmax = std::max(dmax, v);

    FiberData<M> fd;
    fd.which = which;
    fd.x = x;
    fd.dt = dt;
    fd.tol = cut_tolerance(h);
    auto [samples, exited] = fiber_samples<M>(d, x, which, dt, dmax + 4 * h, fd_step, std::min(1e-2, dt));
    fd.samples = std::move(samples);
    fd.exited = exited;
    fd.minimizing.assign(fd.samples.size(), 0);
    std::size_t k = 0;
    for (; k < fd.samples.size(); ++k) {
        const auto dist = field.at(fd.samples[k].point, 1e-7);
        if (!dist || !(std::abs(*dist - fd.samples[k].t) <= fd.tol)) break;
        fd.minimizing[k] = 1;
    }
    fd.cut_found = k < fd.samples.size();
    fd.cut_index = k == 0 ? 0 : k - 1;
    fd.L = fd.samples[fd.cut_index].t;
    fd.truncated_at_exit = !fd.cut_found && exited;
    return fd;
}

// Fibers from every base node of the field's grid on each source face.
template <int M>
std::vector<FiberData<M>> dirichlet_fibers(const DomainSpec<M>& d, const DistanceField<M>& field) {
    const auto& G = *field.grid;
    std::vector<std::pair<Face, Vec<M - 1>>> starts;
    for (Face f : {Face::bottom, Face::top}) {
        if (!(f == Face::bottom ? field.source_bottom : field.source_top)) continue;
        for (std::size_t i = 0; i < G.node_count(); ++i)
            if (G.on_face(i, Face::bottom)) starts.push_back({f, G.logical(G.index(i)).template head<M - 1>()});
    }
    std::vector<FiberData<M>> out(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) { out[i] = cut_function<M>(d, starts[i].second, starts[i].first, field); });
    return out;
}

struct CutLocusMeasure {
    double fraction = 0.0;        // lumped-volume fraction of nodes near sampled cut points
    std::size_t flagged_nodes = 0;
    std::size_t cut_points = 0;
    std::size_t fibers = 0;
    double h = 0.0;
    double tol = 0.0;
};

// Sampled cut locus: exp^perp(x, L(x)) of fibers that lose minimality inside
// the slab. A node is flagged when within tol (metric length at the node) of
// one of them.
template <int M>
CutLocusMeasure cut_locus_measure(const DomainSpec<M>& d, const DistanceField<M>& field) {
    const auto& G = *field.grid;
    const auto fibers = dirichlet_fibers<M>(d, field);
    CutLocusMeasure m;
    m.h = field.h;
    m.tol = cut_tolerance(field.h);
    m.fibers = fibers.size();
    std::vector<Vec<M>> cuts;
    for (const auto& f : fibers)
        if (f.cut_found) cuts.push_back(f.cut_point());
    m.cut_points = cuts.size();
    const auto w = G.lumped_volume();
    double total = 0.0, hit = 0.0;
    for (std::size_t i = 0; i < G.node_count(); ++i) {
        total += w[i];
        const Mat<M> g = d.ambient->value(G.position(i));
        bool near = false;
        for (const auto& c : cuts) {
            const Vec<M> diff = periodic_delta<M>(d, G.position(i), c);
            if (std::sqrt(diff.dot(g * diff)) <= m.tol) {
                near = true;
                break;
            }
        }
        if (near) {
            hit += w[i];
            ++m.flagged_nodes;
        }
    }
    m.fraction = total > 0 ? hit / total : 0.0;
    return m;
}

template <int M>
void write_fiber_csv(std::ostream& os, const std::vector<FiberData<M>>& fibers, const std::vector<std::string>& base_names) {
    std::vector<std::string> header;
    header.push_back("face");
    for (const auto& n : base_names) header.push_back(n);
    for (const char* c : {"t", "v", "flag"}) header.emplace_back(c);
    CsvWriter csv(os, header);
    for (const auto& f : fibers)
        for (std::size_t k = 0; k < f.samples.size(); ++k) {
            std::vector<double> row{f.which == Face::bottom ? 0.0 : 1.0};
            for (int a = 0; a < M - 1; ++a) row.push_back(f.x[a]);
            row.push_back(f.samples[k].t);
            row.push_back(f.samples[k].v);
            row.push_back(f.minimizing[k] ? 0.0 : 1.0);
            csv.row(row);
        }
}

template <int M>
void write_distance_csv(std::ostream& os, const DistanceField<M>& field, const std::vector<std::string>& base_names) {
    std::vector<std::string> header = base_names;
    header.emplace_back("t");
    header.emplace_back("d");
    CsvWriter csv(os, header);
    for (std::size_t i = 0; i < field.grid->node_count(); ++i) {
        std::vector<double> row;
        const auto& p = field.grid->position(i);
        for (int a = 0; a < M; ++a) row.push_back(p[a]);
        row.push_back(field.d[i]);
        csv.row(row);
    }
}

}  // namespace boundedgeo
