"""prefrl: a small-scale preference-optimization toolkit."""
