from .tables import log_frame, log_summary, render_table, smoothed
from .charts import training_curve, score_histogram, save_chart
