"""Oracle - Monte-Carlo reference prices used to verify the closed-form pricers."""
