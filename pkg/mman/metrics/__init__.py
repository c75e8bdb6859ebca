from .segmentation import MetricsReport as MetricsReport
from .segmentation import evaluate_dataset as evaluate_dataset
from .segmentation import iou as iou
from .segmentation import ipr as ipr
from .segmentation import low_res_miou as low_res_miou
from .segmentation import pixel_accuracy as pixel_accuracy
from .convergence import ConvergenceTrace as ConvergenceTrace
from .convergence import classify_convergence as classify_convergence
from .convergence import convergence_summary as convergence_summary
from .curves import export_curves as export_curves
