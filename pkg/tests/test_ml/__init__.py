# ML tests module