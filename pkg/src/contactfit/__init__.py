"""Contact-guided 3D human-object registration toolkit."""

from .body import BodyModel, ChainSpec, PoseVector, kinematic_chain, pose_body
from .camera import Camera, project_points
from .contact import (
    ContactAxis,
    ContactPatch,
    CorrespondenceSet,
    ParamPatch,
    extract_patches,
    parameterize_patch,
    project_contacts,
    synthesize_axis,
    transfer_patch,
    unpack_axis,
)
from .geodesics import (
    GeodesicPath,
    exp_map,
    log_map,
    shortest_geodesic_path,
    trace_straightest_geodesic,
)
from .mesh import SurfaceMesh, SurfacePoint, TangentDirection, build_mesh, \
    closest_surface_point
from .metrics import (
    SimilarityTransform,
    chamfer,
    contact_f1,
    gt_contact_extract,
    icp_align,
    pa_cd,
    procrustes_align,
)
from .pipeline import (
    FitConfig,
    FitInputs,
    FitResult,
    fit,
    stage1_register,
    stage2_refine,
    stage3_refine,
)
from .raster import SilhouetteMask, rasterize_silhouette
from .retrieval import (
    EmbeddingRecord,
    EmbeddingStore,
    OracleClient,
    OracleResponse,
    nn_contact_annotation,
    nn_objects,
    refine_contacts,
)
from .rigid import RigidPose
from .sdf import SdfGrid, build_sdf, query_sdf

__all__ = [name for name in dir() if not name.startswith("_")]
