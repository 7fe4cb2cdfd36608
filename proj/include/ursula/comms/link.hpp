// Link models for the three command/telemetry channels: the tether
// (umbilical ethernet), the visible-light link and the surface radio.
#pragma once

#include "ursula/core.hpp"
#include "ursula/modes.hpp"

#include <optional>
#include <string_view>

namespace ursula::comms {

enum class LinkKind { Umbilical, Vlc, LteWifi };

inline std::string_view to_string(LinkKind k) {
    switch (k) {
    case LinkKind::Umbilical: return "umbilical";
    case LinkKind::Vlc: return "vlc";
    case LinkKind::LteWifi: return "lte_wifi";
    }
    return "?";
}

inline std::optional<LinkKind> link_kind_from_string(std::string_view s) {
    for (LinkKind k : {LinkKind::Umbilical, LinkKind::Vlc, LinkKind::LteWifi}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

struct LinkModel {
    LinkKind kind = LinkKind::Umbilical;
    double bandwidth_kbps = 100000.0;
    double latency_ms = 1.0;
    double max_range_m = 20.0;        ///< VLC only
    double max_alignment_deg = 60.0;  ///< VLC only
    double floor_fraction = 0.1;      ///< VLC bandwidth at max range
    double surface_depth_m = 0.3;     ///< LTE/WiFi only

    static LinkModel umbilical() { return {}; }
    static LinkModel vlc() { return {LinkKind::Vlc, 10000.0, 5.0}; }
    static LinkModel lte_wifi() { return {LinkKind::LteWifi, 5000.0, 50.0}; }
};

inline void validate(const LinkModel& m) {
    require_finite({m.bandwidth_kbps, m.latency_ms, m.max_range_m, m.max_alignment_deg, m.floor_fraction,
                    m.surface_depth_m},
                   "link model");
    if (!(m.bandwidth_kbps > 0.0) || m.latency_ms < 0.0 || !(m.max_range_m > 0.0) ||
        m.max_alignment_deg < 0.0 || !(m.floor_fraction > 0.0 && m.floor_fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "link model: parameters out of range");
    }
}

struct LinkStatus {
    LinkKind kind = LinkKind::Umbilical;
    bool available = false;
    double bandwidth_kbps = 0.0; ///< zero when unavailable
    double latency_ms = 0.0;

    bool operator==(const LinkStatus&) const = default;
};

/// Geometry the availability predicates depend on. `range_m` and
/// `alignment_deg` are measured to the optical base station.
struct LinkGeometry {
    double depth_m = 0.0;
    double range_m = 0.0;
    double alignment_deg = 0.0;
};

/// Umbilical: always up at full rate. VLC: up within range and alignment
/// limits, bandwidth falling linearly from full at zero range to
/// floor_fraction at max range. LTE/WiFi: up only above the surface depth.
inline LinkStatus link_available(const LinkModel& m, const LinkGeometry& g) {
    require_finite({g.depth_m, g.range_m, g.alignment_deg}, "link geometry");
    if (g.depth_m < 0.0 || g.range_m < 0.0 || g.alignment_deg < 0.0) {
        throw Error(ErrorCode::InvalidArgument, "link_available: inputs must be nonnegative");
    }
    LinkStatus s{m.kind, false, 0.0, m.latency_ms};
    switch (m.kind) {
    case LinkKind::Umbilical: s.available = true; break;
    case LinkKind::Vlc: s.available = g.range_m <= m.max_range_m && g.alignment_deg <= m.max_alignment_deg; break;
    case LinkKind::LteWifi: s.available = g.depth_m < m.surface_depth_m; break;
    }
    if (!s.available) return s;
    s.bandwidth_kbps = m.bandwidth_kbps;
    if (m.kind == LinkKind::Vlc) {
        s.bandwidth_kbps *= 1.0 - (1.0 - m.floor_fraction) * g.range_m / m.max_range_m;
    }
    return s;
}

struct LinkSet {
    LinkModel umbilical = LinkModel::umbilical();
    LinkModel vlc = LinkModel::vlc();
    LinkModel lte_wifi = LinkModel::lte_wifi();
};

/// TET binds to the umbilical. NOWIRE uses VLC, falling back to LTE/WiFi at
/// the surface; when neither is up the VLC status is reported.
inline LinkStatus select_link(modes::LinkMode mode, const LinkSet& links, const LinkGeometry& g) {
    if (mode == modes::LinkMode::TET) return link_available(links.umbilical, g);
    const LinkStatus vlc = link_available(links.vlc, g);
    if (vlc.available) return vlc;
    const LinkStatus lte = link_available(links.lte_wifi, g);
    return lte.available ? lte : vlc;
}

} // namespace ursula::comms
