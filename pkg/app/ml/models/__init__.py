# Tagger models
