"""Cross-quantilogram analysis and quantile-augmented volatility forecasting."""
