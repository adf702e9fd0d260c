/*
 * Copyright 2026 The misspec Authors
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


#include "misspec/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <fmt/format.h>

namespace misspec::cli
{

namespace
{

struct Range
{
    double lo = 0.0;
    double hi = 1.0;
};

auto padded(double lo, double hi) -> Range
{
    if (!(hi > lo))
    {
        const double c = std::isfinite(lo) ? lo : 0.5;
        return {c - 0.01, c + 0.01};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

// Plot area inside an SVG, mapping data coordinates to pixels.
struct Frame
{
    double x0, y0, w, h;
    Range xr, yr;

    [[nodiscard]] double px(double x) const { return x0 + w * (x - xr.lo) / (xr.hi - xr.lo); }
    [[nodiscard]] double py(double y) const
    {
        return y0 + h - h * (y - yr.lo) / (yr.hi - yr.lo);
    }
};

auto header(int width, int height) -> std::string
{
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
        width, height);
}

auto escape(const std::string& text) -> std::string
{
    std::string out;
    for (char c : text)
    {
        switch (c)
        {
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '&':
                out += "&amp;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

auto axes(const Frame& f, const std::string& xlabel, const std::string& ylabel,
          int ticks) -> std::string
{
    std::string s = fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
        "stroke=\"black\"/>\n",
        f.x0, f.y0, f.w, f.h);
    for (int i = 0; i <= ticks; ++i)
    {
        const double u = static_cast<double>(i) / ticks;
        const double xv = f.xr.lo + u * (f.xr.hi - f.xr.lo);
        const double yv = f.yr.lo + u * (f.yr.hi - f.yr.lo);
        const double xp = f.px(xv);
        const double yp = f.py(yv);
        s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" "
                         "stroke=\"black\"/>\n",
                         xp, f.y0 + f.h, f.y0 + f.h + 4);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" "
                         "font-size=\"10\">{:.3g}</text>\n",
                         xp, f.y0 + f.h + 16, xv);
        s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" "
                         "stroke=\"black\"/>\n",
                         f.x0 - 4, yp, f.x0);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" "
                         "font-size=\"10\">{:.3g}</text>\n",
                         f.x0 - 6, yp + 3, yv);
    }
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n",
                     f.x0 + f.w / 2, f.y0 + f.h + 34, escape(xlabel));
    s += fmt::format("<text x=\"{0:.2f}\" y=\"{1:.2f}\" text-anchor=\"middle\" "
                     "transform=\"rotate(-90 {0:.2f} {1:.2f})\">{2}</text>\n",
                     f.x0 - 44, f.y0 + f.h / 2, escape(ylabel));
    return s;
}

bool contains(const std::vector<ModelPoint>& set, const ModelPoint& p)
{
    return std::find(set.begin(), set.end(), p) != set.end();
}

auto frame_for(std::span<const ModelPoint> points, double x0, double y0, double w,
               double h) -> Frame
{
    double xlo = std::numeric_limits<double>::infinity();
    double xhi = -xlo;
    double ylo = xlo;
    double yhi = -xlo;
    for (const auto& p : points)
    {
        xlo = std::min(xlo, p.id_metric);
        xhi = std::max(xhi, p.id_metric);
        ylo = std::min(ylo, p.ood_metric);
        yhi = std::max(yhi, p.ood_metric);
    }
    if (points.empty())
    {
        xlo = ylo = 0.0;
        xhi = yhi = 1.0;
    }
    return {x0, y0, w, h, padded(xlo, xhi), padded(ylo, yhi)};
}

auto marks(const Frame& f, std::span<const ModelPoint> points, const SelectionReport* report,
           double size) -> std::string
{
    std::string s;
    for (const auto& p : points)
    {
        const double x = f.px(p.id_metric);
        const double y = f.py(p.ood_metric);
        if (p.method == "erm")
        {
            s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" "
                             "fill=\"#888888\" fill-opacity=\"0.7\"/>\n",
                             x, y, size);
        }
        else
        {
            s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" "
                             "height=\"{:.2f}\" fill=\"#ff9900\" fill-opacity=\"0.7\"/>\n",
                             x - size, y - size, 2 * size, 2 * size);
        }
    }
    if (report == nullptr)
    {
        return s;
    }
    for (const auto& p : points)
    {
        for (auto [set, colour, grow] :
             {std::tuple{&report->selected_by_id, "#1f4fff", 2.0},
              std::tuple{&report->selected_by_ood, "#e02020", 4.0}})
        {
            if (contains(*set, p))
            {
                s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" "
                                 "fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                                 f.px(p.id_metric), f.py(p.ood_metric), size + grow,
                                 colour);
            }
        }
    }
    return s;
}

auto legend_entry(double x, double y, const std::string& swatch, const std::string& text)
    -> std::string
{
    return swatch
           + fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", x + 14, y + 4,
                         escape(text));
}

}  // namespace

auto scatter_svg(std::span<const ModelPoint> points, const SelectionReport* report,
                 const std::string& title) -> std::string
{
    constexpr int width = 640;
    constexpr int height = 480;
    const Frame f = frame_for(points, 70, 40, 400, 380);
    std::string s = header(width, height);
    s += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" "
                     "font-size=\"14\">{}</text>\n",
                     width / 2, escape(title));
    s += axes(f, "ID accuracy", "OOD accuracy", 4);
    s += marks(f, points, report, 3.0);

    const double lx = 490;
    double ly = 60;
    s += legend_entry(lx, ly,
                      fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" "
                                  "fill=\"#888888\"/>\n",
                                  lx, ly),
                      "ERM");
    ly += 20;
    s += legend_entry(lx, ly,
                      fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"6\" height=\"6\" "
                                  "fill=\"#ff9900\"/>\n",
                                  lx - 3, ly - 3),
                      "diverse");
    if (report != nullptr)
    {
        ly += 20;
        s += legend_entry(lx, ly,
                          fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"5\" "
                                      "fill=\"none\" stroke=\"#1f4fff\" stroke-width=\"2\"/>\n",
                                      lx, ly),
                          "best ID per run");
        ly += 20;
        s += legend_entry(lx, ly,
                          fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"7\" "
                                      "fill=\"none\" stroke=\"#e02020\" stroke-width=\"2\"/>\n",
                                      lx, ly),
                          "best OOD per run");
        ly += 30;
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">full: {}</text>\n", lx - 6, ly,
                         to_string(report->pattern_full.pattern));
        ly += 18;
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">epoch {}: {}</text>\n", lx - 6, ly,
                         report->fixed_epoch, to_string(report->pattern_filtered.pattern));
        ly += 18;
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">regret {:.4f}</text>\n", lx - 6,
                         ly, report->ood_regret);
    }
    s += "</svg>\n";
    return s;
}

auto risk_curves_svg(std::span<const SweepStep> steps) -> std::string
{
    constexpr int width = 640;
    constexpr int height = 420;
    double ylo = 0.0;
    double yhi = 0.0;
    for (const auto& st : steps)
    {
        yhi = std::max({yhi, st.l_id, st.l_ood});
    }
    const double xhi = std::max<double>(1.0, static_cast<double>(steps.size()) - 1.0);
    const Frame f{70, 40, 420, 320, {-0.05 * xhi, 1.05 * xhi}, padded(ylo, yhi)};
    std::string s = header(width, height);
    s += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
                     "Risk while adding spurious features</text>\n",
                     width / 2);
    s += axes(f, "spurious features added", "mean squared error", 4);

    for (auto [use_id, colour] : {std::pair{true, "#1f4fff"}, std::pair{false, "#e02020"}})
    {
        std::string pts;
        for (std::size_t i = 0; i < steps.size(); ++i)
        {
            const double v = use_id ? steps[i].l_id : steps[i].l_ood;
            pts += fmt::format("{}{:.2f},{:.2f}", i == 0 ? "" : " ",
                               f.px(static_cast<double>(i)), f.py(v));
            s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n",
                             f.px(static_cast<double>(i)), f.py(v), colour);
        }
        s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" "
                         "stroke-width=\"2\"/>\n",
                         pts, colour);
    }
    const double lx = 510;
    s += legend_entry(lx, 60,
                      fmt::format("<line x1=\"{0:.2f}\" y1=\"60\" x2=\"{1:.2f}\" y2=\"60\" "
                                  "stroke=\"#1f4fff\" stroke-width=\"2\"/>\n",
                                  lx - 6, lx + 6),
                      "L_ID");
    s += legend_entry(lx, 80,
                      fmt::format("<line x1=\"{0:.2f}\" y1=\"80\" x2=\"{1:.2f}\" y2=\"80\" "
                                  "stroke=\"#e02020\" stroke-width=\"2\"/>\n",
                                  lx - 6, lx + 6),
                      "L_OOD");
    s += "</svg>\n";
    return s;
}

auto panel_strip_svg(std::span<const ShiftSweepRow> rows) -> std::string
{
    constexpr int panel = 220;
    const int width = std::max(1, static_cast<int>(rows.size())) * panel + 20;
    constexpr int height = 280;
    std::string s = header(width, height);
    for (std::size_t k = 0; k < rows.size(); ++k)
    {
        const auto& row = rows[k];
        const double x0 = 20 + static_cast<double>(k) * panel + 50;
        const Frame f = frame_for(row.points, x0, 50, panel - 70, panel - 70);
        s += fmt::format("<text x=\"{:.2f}\" y=\"20\" text-anchor=\"middle\">t = {:.2f}</text>\n",
                         x0 + f.w / 2, row.t);
        s += fmt::format("<text x=\"{:.2f}\" y=\"38\" text-anchor=\"middle\">{} "
                         "(r = {:.2f})</text>\n",
                         x0 + f.w / 2, to_string(row.label.pattern), row.label.pearson_r);
        s += axes(f, "ID accuracy", k == 0 ? "OOD accuracy" : "", 2);
        s += marks(f, row.points, nullptr, 2.0);
    }
    s += "</svg>\n";
    return s;
}

}  // namespace misspec::cli
