namespace mmg {}
