console.log('served live, today');
