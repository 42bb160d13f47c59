#include "panosplat/pipeline.hpp"

#include "panosplat/error.hpp"

namespace panosplat {

InitCloud build_init_cloud(const std::vector<PanoramaInput>& inputs, const PipelineOptions& opt) {
    if (!(opt.layout_density > 0.0)) throw InvalidParameterError("layout density must be positive");
    std::vector<RoomLayout3D> rooms;
    for (const auto& in : inputs) {
        if (in.layout) rooms.push_back(lift_boundary(*in.layout, in.camera, opt.lift));
    }
    if (rooms.empty()) throw InvalidParameterError("initialization needs at least one layout boundary");

    InitCloud out;
    out.layout = rooms.size() == 1 ? rooms.front() : union_layouts(rooms, opt.merge);
    const PointCloud layout_cloud = sample_layout(out.layout, opt.layout_density, opt.seed);

    std::vector<PointCloud> depth_clouds;
    for (const auto& in : inputs) {
        if (!in.depth) continue;
        PointCloud c = depth_to_cloud(*in.depth, in.rgb, in.camera, opt.depth_stride);
        const double s = opt.align_depth ? align_depth_scale(c, out.layout, in.camera) : 1.0;
        scale_cloud(c, in.camera.center(), s);
        out.depth_scales.push_back(s);
        depth_clouds.push_back(std::move(c));
    }
    out.cloud = fuse_init(layout_cloud, depth_clouds, opt.voxel);
    return out;
}

} // namespace panosplat
