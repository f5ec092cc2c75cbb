"""Four-photon driven-dissipative cat stabilisation from cascaded two-photon pumps."""
