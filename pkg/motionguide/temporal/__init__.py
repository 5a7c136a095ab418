from motionguide.temporal.temporal_agg import WindowPlan, aggregate, plan_windows, window_weights

__all__ = ["WindowPlan", "aggregate", "plan_windows", "window_weights"]
