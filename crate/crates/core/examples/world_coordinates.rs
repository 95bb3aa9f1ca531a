//! Read a MetaImage header and convert nodule centers between world (mm)
//! and voxel coordinates, including an oblique direction matrix.

use lungdet::ct_io::{parse_mhd, voxel_to_world, world_to_voxel};

const HEADER: &str = "\
ObjectType = Image
NDims = 3
BinaryData = True
BinaryDataByteOrderMSB = False
CompressedData = False
TransformMatrix = 0.9848 -0.1736 0 0.1736 0.9848 0 0 0 1
Offset = -195.6 -187.3 -335.5
ElementSpacing = 0.7 0.7 2.5
DimSize = 512 512 121
ElementType = MET_SHORT
ElementDataFile = scan.raw
";

fn main() -> lungdet::Result<()> {
    let meta = parse_mhd(HEADER)?;
    println!("dims {:?}, spacing {:?} mm", meta.dims, meta.spacing);
    for world in [[-100.2, 67.3, -231.1], [56.1, -20.0, -150.0]] {
        let v = world_to_voxel(world, &meta)?;
        let back = voxel_to_world(v, &meta);
        println!(
            "world {world:?} -> voxel [{:.3}, {:.3}, {:.3}] -> world [{:.6}, {:.6}, {:.6}]",
            v[0], v[1], v[2], back[0], back[1], back[2]
        );
    }
    Ok(())
}
